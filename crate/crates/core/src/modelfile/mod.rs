//! `.morph` text format.
//!
//! ```text
//! system smart_home "Smart home management system" {
//!   config { k = 3; l = 3; default_compat = 3; }
//!   criteria { criterion C1 "cost" minimize scale 0..5; ... }
//!   part S {
//!     part D weights [2, 1, 2, 3] {
//!       leaf G { alt G1 "Manual" est [1, 0, 3, 3] priority 2; ... }
//!       ...
//!     }
//!   }
//!   compat G * H { G1, H1 = 3; ... }
//! }
//! ```

mod lexer;
mod parser;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::model::Severity;
pub use parser::parse;
pub use serialize::serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    pub(crate) fn error(span: SourceSpan, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            span,
            message: message.into(),
            severity: Severity::Error,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {sev}: {}",
            self.span.line, self.span.column, self.message
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const SKELETON_HEAD: &str = r#"system t "t" {
  criteria {
    criterion C1 minimize scale 0..5;
    criterion C2 minimize scale 0..5;
    criterion C3 maximize scale 0..5;
    criterion C4 maximize scale 0..5;
  }
  part S weights [1, 1, 1, 1] {
"#;

    fn with_leaves(body: &str) -> String {
        format!("{SKELETON_HEAD}{body}\n    leaf H {{ alt H1 est [1, 0, 3, 3]; }}\n  }}\n}}\n")
    }

    #[test]
    fn fixture_counts() {
        let m = fixtures::smart_home();
        assert_eq!(m.leaves().len(), 16);
        let alts: usize = m.leaves().iter().map(|l| l.alternatives.len()).sum();
        assert_eq!(alts, 41);
        assert_eq!(m.weights().len(), 6);
        assert_eq!(m.compat.len(), 14);
    }

    #[test]
    fn leaf_with_priority() {
        let m = parse(&with_leaves(
            "    leaf G { alt G1 est [1,0,3,3] priority 2; }",
        ))
        .unwrap();
        let g1 = m.alternative("G1").unwrap();
        assert_eq!(g1.given_priority, Some(2));
        assert_eq!(g1.estimates, vec![1, 0, 3, 3]);
        assert_eq!(m.alternative("H1").unwrap().given_priority, None);
    }

    #[test]
    fn arity_mismatch_points_at_the_list() {
        let text = with_leaves("    leaf G { alt G1 est [1,0,3] priority 2; }");
        let diags = parse(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].message, "expected 4 estimates, found 3");
        let at = text.find("[1,0,3]").unwrap();
        assert_eq!(diags[0].span.offset, at);
        assert_eq!(diags[0].span.line, 9);
    }

    #[test]
    fn out_of_scale_estimate_points_at_the_value() {
        let text = with_leaves("    leaf G { alt G1 est [1,0,9,3]; }");
        let diags = parse(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].span.offset, text.find("9,3]").unwrap());
    }

    #[test]
    fn unknown_and_duplicate_ids() {
        let text = with_leaves("    leaf G { alt G1 est [1,0,3,3]; alt G1 est [1,0,3,3]; }")
            .replace("  }\n}\n", "  }\n  compat G * Q { G1, H1 = 3; }\n}\n");
        let diags = parse(&text).unwrap_err();
        let msgs: Vec<&str> = diags.iter().map(|d| d.message.as_str()).collect();
        assert!(
            msgs.iter()
                .any(|m| m.contains("duplicate alternative id G1")),
            "{msgs:?}"
        );
        assert!(
            msgs.iter().any(|m| m.contains("unknown leaf Q")),
            "{msgs:?}"
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let text = "system t \"t\" { criteria { criterion C1 sideways scale 0..5; } }";
        let diags = parse(text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].span.column, text.find("sideways").unwrap() + 1);
        assert!(diags[0].message.contains("`maximize` or `minimize`"));
    }

    #[test]
    fn round_trip_fixture() {
        let m = fixtures::smart_home();
        let text = serialize(&m);
        let again = parse(&text).unwrap();
        assert_eq!(again, m);
        assert_eq!(serialize(&again), text);
    }

    #[test]
    fn empty_name_round_trips() {
        let mut m = fixtures::smart_home();
        m.name = String::new();
        let text = serialize(&m);
        assert!(text.starts_with("system smart_home \"\" {"));
        assert_eq!(parse(&text).unwrap(), m);
    }
}
