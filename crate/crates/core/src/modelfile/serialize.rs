use std::fmt::Write;

use crate::model::{CompatibilityTable, Part, SystemModel};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn label(s: &str) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!(" {}", quote(s))
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn write_part(out: &mut String, part: &Part, depth: usize) {
    let pad = "  ".repeat(depth);
    match part {
        Part::Composite(c) => {
            let weights = match &c.weights {
                Some(w) => format!(" weights [{}]", join(w)),
                None => String::new(),
            };
            let _ = writeln!(out, "{pad}part {}{}{} {{", c.id, label(&c.label), weights);
            for ch in &c.children {
                write_part(out, ch, depth + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        Part::Leaf(l) => {
            let _ = writeln!(out, "{pad}leaf {}{} {{", l.id, label(&l.label));
            for a in &l.alternatives {
                let priority = match a.given_priority {
                    Some(p) => format!(" priority {p}"),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{pad}  alt {}{} est [{}]{};",
                    a.id,
                    label(&a.label),
                    join(&a.estimates),
                    priority
                );
            }
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

fn write_compat(out: &mut String, t: &CompatibilityTable) {
    let _ = writeln!(out, "  compat {} * {} {{", t.leaf_a, t.leaf_b);
    for ((x, y), level) in &t.entries {
        let _ = writeln!(out, "    {x}, {y} = {level};");
    }
    let _ = writeln!(out, "  }}");
}

/// Canonical text form: fixed two-space indentation, config always
/// written out in full, compatibility entries in sorted order.
pub fn serialize(model: &SystemModel) -> String {
    let mut out = String::new();
    let c = &model.config;
    let _ = writeln!(out, "system {} {} {{", model.id, quote(&model.name));
    let _ = writeln!(out, "  config {{");
    let _ = writeln!(out, "    k = {};", c.k);
    let _ = writeln!(out, "    l = {};", c.l);
    let _ = writeln!(out, "    default_compat = {};", c.default_compat);
    let _ = writeln!(out, "    concordance_p = {};", c.concordance_p);
    let _ = writeln!(out, "    discordance_q = {};", c.discordance_q);
    let _ = writeln!(out, "  }}");
    let _ = writeln!(out, "  criteria {{");
    for cr in &model.criteria {
        let _ = writeln!(
            out,
            "    criterion {}{} {} scale {}..{};",
            cr.id,
            label(&cr.label),
            cr.orientation.keyword(),
            cr.scale_lo,
            cr.scale_hi
        );
    }
    let _ = writeln!(out, "  }}");
    write_part(&mut out, &model.root, 1);
    for t in &model.compat {
        write_compat(&mut out, t);
    }
    let _ = writeln!(out, "}}");
    out
}
