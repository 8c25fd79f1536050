use std::fmt;

use crate::types::Micros;

/// One CSV cell. Floats render with six decimals, times as `secs.micros`.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Time(Micros),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:.6}"),
            Value::Time(t) => write!(f, "{t}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Renders an optional cell; undefined values become an empty string.
pub fn render(cell: &Option<Value>) -> String {
    cell.as_ref().map(Value::to_string).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering() {
        assert_eq!(render(&Some(Value::Float(1.0 / 3.0))), "0.333333");
        assert_eq!(render(&Some(Value::Time(Micros(1_500_000)))), "1.500000");
        assert_eq!(render(&Some(Value::Int(7))), "7");
        assert_eq!(render(&None), "");
    }
}
