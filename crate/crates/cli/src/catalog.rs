//! Built-in scalar function catalog: multivariate functions for `f`, convex
//! univariate functions for W-bound families, the `g` kinds, and the
//! comparison functions accepted by fundamental bounds.

use loewner_core::wbound::ScalarFn1;

/// `(name, description)` rows, alphabetical so the listing is stable.
pub const MULTIVARIATE_KINDS: &[(&str, &str)] = &[
    ("affine", "offset + <coeffs, x>"),
    ("exp-sum", "scale * exp(<beta, x>)"),
    ("log-sum", "scale * log(<beta, x>)"),
    ("polynomial", "sum of coeff * prod_i x_i^e_i monomials"),
    ("power-sum", "scale * (<beta, x>)^q"),
    ("sigmoid-file", "sigmoid combination loaded from a JSON document"),
];

pub const UNIVARIATE_NAMES: &[(&str, &str)] = &[
    ("exp", "e^x (convex)"),
    ("identity", "x (convex)"),
    ("neg-entropy", "x log x (convex, x > 0)"),
    ("square", "x^2 (convex)"),
];

pub const G_KINDS: &[(&str, &str)] = &[
    ("exp", "exp(<beta, x>)"),
    ("log", "log(<beta, x>), positive argument"),
    ("power", "(<beta, x>)^q"),
];

pub const COMPARISON_FUNCTIONS: &[(&str, &str)] = &[
    ("difference", "F(u, v) = u - v"),
    ("first", "F(u, v) = u"),
];

/// Resolve a univariate catalog name.
pub fn univariate(name: &str) -> Option<ScalarFn1> {
    match name {
        "identity" => Some(ScalarFn1::new("identity", |x| x)),
        "square" => Some(ScalarFn1::new("square", |x| x * x)),
        "exp" => Some(ScalarFn1::new("exp", f64::exp)),
        "neg-entropy" => Some(ScalarFn1::new("neg-entropy", |x| x * x.ln())),
        _ => None,
    }
}

/// Resolve a comparison-function name for fundamental bounds.
pub fn comparison(name: &str) -> Option<(fn(f64, f64) -> f64, &'static str)> {
    match name {
        "difference" => Some((|u, v| u - v, "F(u,v)=u-v")),
        "first" => Some((|u, _| u, "F(u,v)=u")),
        _ => None,
    }
}

/// The full listing printed by the `catalog` subcommand.
pub fn listing() -> String {
    let mut out = String::new();
    let section = |out: &mut String, title: &str, rows: &[(&str, &str)]| {
        out.push_str(title);
        out.push('\n');
        for (name, desc) in rows {
            out.push_str(&format!("  {name:<14} {desc}\n"));
        }
    };
    section(&mut out, "multivariate functions (f):", MULTIVARIATE_KINDS);
    section(&mut out, "univariate functions (wbound families, g of one variable):", UNIVARIATE_NAMES);
    section(&mut out, "g kinds:", G_KINDS);
    section(&mut out, "comparison functions (fundamental bounds):", COMPARISON_FUNCTIONS);
    out
}

/// Nearest catalog name by edit distance, for config error messages.
pub fn nearest(name: &str, candidates: &[(&str, &str)]) -> String {
    candidates
        .iter()
        .map(|(c, _)| (*c, levenshtein(name, c)))
        .min_by_key(|&(_, d)| d)
        .map(|(c, _)| c.to_string())
        .unwrap_or_default()
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
