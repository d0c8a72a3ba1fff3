//! CPLEX LP and fixed-format MPS writers.
//!
//! Column names are mangled to the identifier rules of the target format;
//! the mapping is returned next to the text. All variables are free.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::str::FromStr;

use crate::ground::GroundLp;
use crate::rlp::{Rel, Sense};
use crate::scalar::{format_scalar, Scalar};

use super::DualFormLp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Lp,
    Mps,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lp" | "lp-file" => Ok(ExportFormat::Lp),
            "mps" => Ok(ExportFormat::Mps),
            _ => Err(format!("unknown export format `{s}` (expected lp or mps)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exported {
    pub text: String,
    /// `(name in file, original column name)`, in column order.
    pub names: Vec<(String, String)>,
}

struct Row {
    coeffs: Vec<(usize, String)>,
    rel: Rel,
    rhs: String,
}

struct Model {
    sense: Sense,
    cols: Vec<String>,
    obj: Vec<String>,
    rows: Vec<Row>,
}

fn ground_model(lp: &GroundLp) -> Model {
    Model {
        sense: lp.sense,
        cols: lp.var_names.iter().map(|v| v.to_string()).collect(),
        obj: lp.c.iter().map(format_scalar).collect(),
        rows: lp
            .rows
            .iter()
            .map(|r| Row {
                coeffs: r.coeffs.iter().map(|(j, a)| (*j, format_scalar(a))).collect(),
                rel: r.rel,
                rhs: format_scalar(&r.rhs),
            })
            .collect(),
    }
}

fn dual_model<T: Scalar>(lp: &DualFormLp<T>) -> Model {
    Model {
        sense: Sense::Minimize,
        cols: lp.col_names.clone(),
        obj: lp.c.iter().map(format_scalar).collect(),
        rows: (0..lp.nrows())
            .map(|i| Row {
                coeffs: lp.a.row(i).map(|(j, a)| (j, format_scalar(a))).collect(),
                rel: Rel::Le,
                rhs: format_scalar(&lp.b[i]),
            })
            .collect(),
    }
}

fn mangle_lp(names: &[String]) -> Vec<String> {
    let mut used = BTreeSet::new();
    names
        .iter()
        .map(|n| {
            let mut s: String = n
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
                .collect();
            while s.ends_with('_') && s.len() > 1 {
                s.pop();
            }
            if s.is_empty() || !s.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
                s.insert_str(0, "v_");
            }
            let mut cand = s.clone();
            let mut k = 2;
            while !used.insert(cand.clone()) {
                cand = format!("{s}_{k}");
                k += 1;
            }
            cand
        })
        .collect()
}

fn write_lp(m: &Model, names: &[String]) -> String {
    let mut out = String::new();
    let term = |out: &mut String, first: bool, coef: &str, name: &str| {
        let (neg, mag) = match coef.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, coef),
        };
        let sign = match (first, neg) {
            (true, false) => "",
            (true, true) => "- ",
            (false, false) => "+ ",
            (false, true) => "- ",
        };
        let mag = if mag == "1" { String::new() } else { format!("{mag} ") };
        let _ = write!(out, "{sign}{mag}{name}");
    };
    out.push_str(match m.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let mut first = true;
    for (j, c) in m.obj.iter().enumerate() {
        if c != "0" {
            out.push(' ');
            term(&mut out, first, c, &names[j]);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (i, r) in m.rows.iter().enumerate() {
        let _ = write!(out, " r{}:", i + 1);
        if r.coeffs.is_empty() {
            // constant row
            out.push_str(" 0 ");
            out.push_str(names.first().map_or("dummy", |s| s.as_str()));
        }
        for (k, (j, a)) in r.coeffs.iter().enumerate() {
            out.push(' ');
            term(&mut out, k == 0, a, &names[*j]);
        }
        let _ = writeln!(out, " {} {}", r.rel.symbol(), r.rhs);
    }
    if !names.is_empty() {
        out.push_str("Bounds\n");
        for n in names {
            let _ = writeln!(out, " {n} free");
        }
    }
    out.push_str("End\n");
    out
}

fn write_mps(m: &Model, names: &[String]) -> String {
    let mut out = String::new();
    let field = |out: &mut String, a: &str, b: &str, c: &str, d: &str| {
        let line = format!(" {a:<2} {b:<8}  {c:<8}  {d:>12}");
        let _ = writeln!(out, "{}", line.trim_end());
    };
    out.push_str("NAME          RLPLIFT\n");
    if m.sense == Sense::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    field(&mut out, "N", "OBJ", "", "");
    let row_names: Vec<String> = (1..=m.rows.len()).map(|i| format!("R{i}")).collect();
    for (r, name) in m.rows.iter().zip(&row_names) {
        let t = match r.rel {
            Rel::Le => "L",
            Rel::Ge => "G",
            Rel::Eq => "E",
        };
        field(&mut out, t, name, "", "");
    }
    // column-major entries
    let mut by_col: Vec<Vec<(&str, &str)>> = vec![Vec::new(); names.len()];
    for (j, c) in m.obj.iter().enumerate() {
        if c != "0" {
            by_col[j].push(("OBJ", c));
        }
    }
    for (r, name) in m.rows.iter().zip(&row_names) {
        for (j, a) in &r.coeffs {
            by_col[*j].push((name, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in by_col.iter().enumerate() {
        if entries.is_empty() {
            field(&mut out, "", &names[j], "OBJ", "0");
        }
        for (row, v) in entries {
            field(&mut out, "", &names[j], row, v);
        }
    }
    out.push_str("RHS\n");
    for (r, name) in m.rows.iter().zip(&row_names) {
        if r.rhs != "0" {
            field(&mut out, "", "RHS", name, &r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for n in names {
        field(&mut out, "FR", "BND", n, "");
    }
    out.push_str("ENDATA\n");
    out
}

fn export_model(m: &Model, format: ExportFormat) -> Exported {
    let mangled = match format {
        ExportFormat::Lp => mangle_lp(&m.cols),
        ExportFormat::Mps => (1..=m.cols.len()).map(|j| format!("C{j:07}")).collect(),
    };
    let text = match format {
        ExportFormat::Lp => write_lp(m, &mangled),
        ExportFormat::Mps => write_mps(m, &mangled),
    };
    Exported {
        text,
        names: mangled.into_iter().zip(m.cols.iter().cloned()).collect(),
    }
}

/// Writes a ground LP, keeping its sense and relations.
pub fn export_ground(lp: &GroundLp, format: ExportFormat) -> Exported {
    export_model(&ground_model(lp), format)
}

/// Writes a dual-form LP (minimization, `≤` rows only).
pub fn export_dual<T: Scalar>(lp: &DualFormLp<T>, format: ExportFormat) -> Exported {
    export_model(&dual_model(lp), format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::to_dual_form;
    use crate::scalar::Rational;

    fn toy() -> GroundLp {
        use crate::logkb::{evaluate, parse_logkb};
        let m = crate::rlp::parse_rlp(crate::ground::tests::TOY_RLP).unwrap();
        let kb = evaluate(&parse_logkb(crate::ground::tests::TOY_KB).unwrap()).unwrap();
        crate::ground::ground(&m, &kb).unwrap()
    }

    const TOY_LP: &str = "Minimize
 obj: p_z
Subject To
 r1: p_x + p_y + p_z <= 1
 r2: - p_x <= 0
 r3: - p_y <= 0
 r4: p_x + p_y - p_z <= -1
Bounds
 p_x free
 p_y free
 p_z free
End
";

    #[test]
    fn toy_lp_file() {
        let e = export_dual(&to_dual_form::<Rational>(&toy()), ExportFormat::Lp);
        assert_eq!(e.text, TOY_LP);
        assert_eq!(e.names[2], ("p_z".to_string(), "p(z)".to_string()));
    }

    #[test]
    fn mps_is_stable() {
        let lp = toy();
        let a = export_ground(&lp, ExportFormat::Mps);
        let b = export_ground(&lp, ExportFormat::Mps);
        assert_eq!(a, b);
        assert!(a.text.contains(" L  R1"));
        assert!(a.text.contains(" FR BND       C0000003"));
        assert!(a.text.ends_with("ENDATA\n"));
    }

    #[test]
    fn empty_lp_is_minimal() {
        let lp: DualFormLp<f64> = DualFormLp::from_dense(&[], vec![], vec![]);
        assert_eq!(export_dual(&lp, ExportFormat::Lp).text, "Minimize\n obj: 0\nSubject To\nEnd\n");
        let mps = export_dual(&lp, ExportFormat::Mps).text;
        assert!(mps.starts_with("NAME") && mps.ends_with("ENDATA\n"));
    }

    #[test]
    fn names_are_unique_after_mangling() {
        let m = mangle_lp(&["f(a,b)".into(), "f(a_b)".into(), "9x".into()]);
        assert_eq!(m, ["f_a_b", "f_a_b_2", "v_9x"]);
    }
}
