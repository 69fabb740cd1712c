use alloc::boxed::Box;
use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;

/// Identifier of one vector in a Gram-constraint system.
///
/// String forms: `u3:2` (item 3, slot 2), `x3:i5` (variable 3, basis vector
/// 5), `x3:s(2,5,+)` (variable 3, normalized sum of basis vectors 2 and 5),
/// `C4` (clause 4; `C0` is the reference clause) and `b2/...` (the same label
/// in copy 2 of an amplified system). Items, slots, basis indices and copies
/// are 1-based; variable 0 is the reference variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Item {
        item: usize,
        slot: usize,
    },
    Basis {
        var: usize,
        index: usize,
    },
    Sum {
        var: usize,
        i: usize,
        j: usize,
        plus: bool,
    },
    Clause(usize),
    Block {
        copy: usize,
        inner: Box<Label>,
    },
}

impl Label {
    /// Variable block this label belongs to, if any.
    pub fn var(&self) -> Option<usize> {
        match self {
            Label::Basis { var, .. } | Label::Sum { var, .. } => Some(*var),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Item { item, slot } => write!(f, "u{item}:{slot}"),
            Label::Basis { var, index } => write!(f, "x{var}:i{index}"),
            Label::Sum { var, i, j, plus } => {
                write!(f, "x{var}:s({i},{j},{})", if *plus { '+' } else { '-' })
            }
            Label::Clause(c) => write!(f, "C{c}"),
            Label::Block { copy, inner } => write!(f, "b{copy}/{inner}"),
        }
    }
}

fn number(s: &str, whole: &str) -> Result<usize, Error> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Invalid(format!("malformed label {whole:?}")));
    }
    s.parse()
        .map_err(|_| Error::Invalid(format!("malformed label {whole:?}")))
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Invalid(format!("malformed label {s:?}"));
        if let Some(rest) = s.strip_prefix('b') {
            let (copy, inner) = rest.split_once('/').ok_or_else(bad)?;
            return Ok(Label::Block {
                copy: number(copy, s)?,
                inner: Box::new(inner.parse()?),
            });
        }
        if let Some(rest) = s.strip_prefix('C') {
            return Ok(Label::Clause(number(rest, s)?));
        }
        if let Some(rest) = s.strip_prefix('u') {
            let (item, slot) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(Label::Item {
                item: number(item, s)?,
                slot: number(slot, s)?,
            });
        }
        if let Some(rest) = s.strip_prefix('x') {
            let (var, tail) = rest.split_once(':').ok_or_else(bad)?;
            let var = number(var, s)?;
            if let Some(index) = tail.strip_prefix('i') {
                return Ok(Label::Basis {
                    var,
                    index: number(index, s)?,
                });
            }
            let inner = tail
                .strip_prefix("s(")
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(bad)?;
            let mut parts = inner.split(',');
            let (i, j, sign) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(i), Some(j), Some(sign), None) => (i, j, sign),
                _ => return Err(bad()),
            };
            let plus = match sign {
                "+" => true,
                "-" => false,
                _ => return Err(bad()),
            };
            return Ok(Label::Sum {
                var,
                i: number(i, s)?,
                j: number(j, s)?,
                plus,
            });
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn round_trips() {
        let labels = [
            Label::Item { item: 3, slot: 2 },
            Label::Basis { var: 3, index: 5 },
            Label::Sum {
                var: 3,
                i: 2,
                j: 5,
                plus: true,
            },
            Label::Sum {
                var: 0,
                i: 1,
                j: 3,
                plus: false,
            },
            Label::Clause(0),
            Label::Clause(4),
            Label::Block {
                copy: 2,
                inner: Box::new(Label::Block {
                    copy: 1,
                    inner: Box::new(Label::Clause(7)),
                }),
            },
        ];
        let text = [
            "u3:2",
            "x3:i5",
            "x3:s(2,5,+)",
            "x0:s(1,3,-)",
            "C0",
            "C4",
            "b2/b1/C7",
        ];
        for (l, t) in labels.iter().zip(text) {
            assert_eq!(l.to_string(), t);
            assert_eq!(&t.parse::<Label>().unwrap(), l);
        }
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "u3",
            "x1:j2",
            "x1:s(1,2)",
            "x1:s(1,2,*)",
            "C",
            "C-1",
            "b/C1",
            "y3",
            "u+1:2",
        ] {
            assert!(bad.parse::<Label>().is_err(), "{bad}");
        }
    }
}
