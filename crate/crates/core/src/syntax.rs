//! Tokenizer shared by the `.lkb` and `.rlp` readers.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase-initial symbol (constants, predicates, keywords).
    Ident(String),
    /// Uppercase- or underscore-initial logical variable.
    Var(String),
    /// The anonymous variable `_`.
    Anon,
    /// Unsigned decimal literal, kept as text for exact parsing.
    Number(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    EqEq,
    Ne,
    Comma,
    Dot,
    Semi,
    Colon,
    ColonDash,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) | Tok::Var(s) | Tok::Number(s) => return write!(f, "`{s}`"),
            Tok::Anon => "_",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Eq => "=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::ColonDash => ":-",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Eof => return write!(f, "end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn at(token: &Token, message: impl Into<String>) -> Self {
        SyntaxError {
            line: token.line,
            col: token.col,
            message: message.into(),
        }
    }
}

/// Splits `text` into tokens. Any character in `comment_chars` starts a
/// comment running to the end of the line.
pub fn tokenize(text: &str, comment_chars: &[char]) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if comment_chars.contains(&c) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let peek = chars.get(i + 1).copied();
        let mut len = 1;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            ';' => Tok::Semi,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            ':' if peek == Some('-') => {
                len = 2;
                Tok::ColonDash
            }
            ':' => Tok::Colon,
            '<' if peek == Some('=') => {
                len = 2;
                Tok::Le
            }
            '<' => Tok::Lt,
            '>' if peek == Some('=') => {
                len = 2;
                Tok::Ge
            }
            '>' => Tok::Gt,
            '=' if peek == Some('=') => {
                len = 2;
                Tok::EqEq
            }
            '=' => Tok::Eq,
            '!' if peek == Some('=') => {
                len = 2;
                Tok::Ne
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                len = j - i;
                Tok::Number(chars[i..j].iter().collect())
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                len = j - i;
                let word: String = chars[i..j].iter().collect();
                if word == "_" {
                    Tok::Anon
                } else if c.is_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                }
            }
            other => {
                return Err(SyntaxError {
                    line: start.0,
                    col: start.1,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        tokens.push(Token {
            tok,
            line: start.0,
            col: start.1,
        });
        i += len;
        col += len;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(tokens)
}

/// Cursor over a token vector with the usual expect/eat helpers.
pub struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(tokens: Vec<Token>) -> Self {
        Cursor { tokens, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    pub fn token(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Token, SyntaxError> {
        if self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.peek())))
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::at(self.token(), message)
    }
}
