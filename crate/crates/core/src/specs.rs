//! Text specifications of spherical functions and bodies.
//!
//! Functions: `poly:<expr>`, `support:<body>`, `bump:<u1,…,un>,<kappa>`,
//! `const:<c>`, `linear:<v1,…,vn>`, and weighted sums such as
//! `2*poly:x1^2 + 0.5*support:ball:1`.
//!
//! Bodies: `ball:<r>`, `ellipsoid:<a1,…,an>` (shape-matrix diagonal),
//! `flat:<a>,<b>,<δ>`, `cylinder:<R>,<δ>`, `needle:<δ>`, Minkowski
//! combinations such as `ball:1 + 0.5*ellipsoid:1,2,3` or
//! `combine:<α>,<body>,<β>,<body>`, and `perturb:<body>,<function>,<s>`
//! for `h + sφ`, certified on a default grid.

use nalgebra::DVector;

use crate::bodies::{ball, combine, ellipsoid, perturbation_family, SupportBody};
use crate::reduction::{needle, CylinderApprox, FlattenedBody};
use crate::sphere::grid::make_grid;
use crate::sphere::{Polynomial, SphericalFunction};
use crate::{Error, Result};

const FUNCTION_KINDS: [&str; 5] = ["poly", "support", "bump", "const", "linear"];
const BODY_KINDS: [&str; 7] = ["ball", "ellipsoid", "flat", "cylinder", "needle", "combine", "perturb"];
/// Nodes of the grid used to certify `perturb:` bodies.
const PERTURB_GRID: usize = 4096;

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn number(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| parse_err(format!("expected a number, got `{}`", s.trim())))
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(number).collect()
}

/// Splits `w*kind:rest` into `(w, kind, rest)` when `kind` is one of `kinds`.
fn split_term<'a>(term: &'a str, kinds: &[&'static str]) -> Option<(f64, &'static str, &'a str)> {
    let term = term.trim();
    let (weight, body) = match term.split_once('*') {
        Some((w, rest)) if w.trim().parse::<f64>().is_ok() && kind_prefix(rest, kinds).is_some() => {
            (w.trim().parse::<f64>().ok()?, rest.trim())
        }
        _ => (1.0, term),
    };
    let kind = kind_prefix(body, kinds)?;
    Some((weight, kind, &body[kind.len() + 1..]))
}

fn kind_prefix<'a>(s: &str, kinds: &[&'a str]) -> Option<&'a str> {
    let s = s.trim_start();
    kinds.iter().copied().find(|k| s.len() > k.len() && s.starts_with(k) && s.as_bytes()[k.len()] == b':')
}

/// Splits at each top-level `+` that starts a new term of one of `kinds`.
fn split_sum<'a>(src: &'a str, kinds: &[&'static str]) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut depth = 0i32;
    let mut quoted = false;
    for (pos, ch) in src.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' if depth == 0 && !quoted && pos > start => {
                if starts_term(&src[pos + 1..], kinds) {
                    parts.push(&src[start..pos]);
                    start = pos + 1;
                }
            }
            _ => {}
        }
    }
    parts.push(&src[start..]);
    parts
}

/// True when the text begins with `[w*]kind:` (the remainder may contain more terms).
fn starts_term(s: &str, kinds: &[&'static str]) -> bool {
    let s = s.trim_start();
    if kind_prefix(s, kinds).is_some() {
        return true;
    }
    match s.split_once('*') {
        Some((w, rest)) => w.trim().parse::<f64>().is_ok() && kind_prefix(rest, kinds).is_some(),
        None => false,
    }
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(s)
}

fn check_dim(found: usize, n: usize, what: &str) -> Result<()> {
    if found != n {
        return Err(parse_err(format!("{what} has dimension {found}, expected {n}")));
    }
    Ok(())
}

/// Parses a function specification on `S^{n-1}`.
pub fn parse_function(src: &str, n: usize) -> Result<SphericalFunction> {
    let parts = split_sum(src, &FUNCTION_KINDS);
    let mut terms = Vec::with_capacity(parts.len());
    for part in parts {
        let (w, kind, rest) = split_term(part, &FUNCTION_KINDS)
            .ok_or_else(|| parse_err(format!("unknown function term `{}`; expected one of {FUNCTION_KINDS:?}", part.trim())))?;
        let f = match kind {
            "poly" => SphericalFunction::polynomial(Polynomial::parse(strip_quotes(rest), n)?),
            "support" => parse_body(rest, n)?.h().clone(),
            "const" => SphericalFunction::constant(n, number(rest)?),
            "linear" => {
                let v = numbers(rest)?;
                check_dim(v.len(), n, "linear coefficient")?;
                SphericalFunction::linear(DVector::from_vec(v))
            }
            "bump" => {
                let v = numbers(rest)?;
                check_dim(v.len(), n + 1, "bump center plus kappa")?;
                let u0 = DVector::from_row_slice(&v[..n]);
                let norm = u0.norm();
                if !(norm > 0.0) || !(v[n] > 0.0) {
                    return Err(parse_err("bump needs a nonzero center and positive kappa"));
                }
                SphericalFunction::bump(u0 / norm, v[n])
            }
            _ => unreachable!("kind list and match agree"),
        };
        terms.push((w, f));
    }
    Ok(if terms.len() == 1 && terms[0].0 == 1.0 {
        terms.pop().expect("one term").1
    } else {
        SphericalFunction::combination(terms)
    })
}

/// `α,K,β,L`: tries each comma that is followed by `<number>,<body kind>:`.
fn parse_combine(rest: &str, n: usize) -> Result<SupportBody> {
    let (alpha, tail) = rest.split_once(',').ok_or_else(|| parse_err("combine:<α>,<body>,<β>,<body>"))?;
    let alpha = number(alpha)?;
    let mut last_err = parse_err(format!("cannot split `combine:{rest}` into two bodies"));
    for (pos, _) in tail.match_indices(',') {
        let Some((beta, second)) = tail[pos + 1..].split_once(',') else { continue };
        let Ok(beta) = beta.trim().parse::<f64>() else { continue };
        if kind_prefix(second, &BODY_KINDS).is_none() {
            continue;
        }
        match (parse_body(&tail[..pos], n), parse_body(second, n)) {
            (Ok(k), Ok(l)) => return combine(alpha, &k, beta, &l),
            (Err(e), _) | (_, Err(e)) => last_err = e,
        }
    }
    Err(last_err)
}

/// `K,φ,s`: the body `h_K + sφ`, which must stay inside the certified family.
fn parse_perturb(rest: &str, n: usize) -> Result<SupportBody> {
    let (head, s) = rest.rsplit_once(',').ok_or_else(|| parse_err("perturb:<body>,<function>,<s>"))?;
    let s = number(s)?;
    let split = head
        .match_indices(',')
        .map(|(pos, _)| pos)
        .find(|&pos| kind_prefix(&head[pos + 1..], &FUNCTION_KINDS).is_some())
        .ok_or_else(|| parse_err(format!("perturb: no function term in `{head}`")))?;
    let base = parse_body(&head[..split], n)?;
    let phi = parse_function(&head[split + 1..], n)?;
    let grid = make_grid(n, PERTURB_GRID, 0)?;
    perturbation_family(&base, &phi, &grid)?.body_at(s)
}

/// Parses a body specification in `R^n`.
pub fn parse_body(src: &str, n: usize) -> Result<SupportBody> {
    let trimmed = src.trim();
    if let Some(rest) = trimmed.strip_prefix("combine:") {
        return parse_combine(rest, n);
    }
    if let Some(rest) = trimmed.strip_prefix("perturb:") {
        return parse_perturb(rest, n);
    }
    let parts = split_sum(src, &BODY_KINDS);
    let mut acc: Option<SupportBody> = None;
    for part in parts {
        let (w, kind, rest) = split_term(part, &BODY_KINDS)
            .ok_or_else(|| parse_err(format!("unknown body term `{}`; expected one of {BODY_KINDS:?}", part.trim())))?;
        if !(w > 0.0) {
            return Err(parse_err("Minkowski weights must be positive"));
        }
        let three = |k: &str| check_dim(3, n, k);
        let body = match kind {
            "ball" => ball(n, number(rest)?)?,
            "ellipsoid" => {
                let a = numbers(rest)?;
                check_dim(a.len(), n, "ellipsoid")?;
                ellipsoid(&a)?
            }
            "flat" => {
                three("flat body")?;
                let v = numbers(rest)?;
                check_dim(v.len(), 3, "flat:<a>,<b>,<δ>")?;
                FlattenedBody::new(v[0], v[1], v[2])?.body3d
            }
            "cylinder" => {
                three("cylinder")?;
                let v = numbers(rest)?;
                check_dim(v.len(), 2, "cylinder:<R>,<δ>")?;
                CylinderApprox::new(v[0], v[1])?.body3d
            }
            "needle" => {
                three("needle")?;
                needle(number(rest)?)?
            }
            "combine" => parse_combine(rest, n)?,
            "perturb" => parse_perturb(rest, n)?,
            _ => unreachable!("kind list and match agree"),
        };
        acc = Some(match acc {
            None if w == 1.0 => body,
            None => body.scaled(w)?,
            Some(prev) => combine(1.0, &prev, w, &body)?,
        });
    }
    acc.ok_or_else(|| parse_err("empty body specification"))
}

/// Parses `disc:<r>` or `ellipse:<a>,<b>` into a planar body thickened by `δ`.
pub fn parse_flat(src: &str, delta: f64) -> Result<FlattenedBody> {
    let src = src.trim();
    if let Some(r) = src.strip_prefix("disc:") {
        FlattenedBody::disc(number(r)?, delta)
    } else if let Some(ab) = src.strip_prefix("ellipse:") {
        let v = numbers(ab)?;
        check_dim(v.len(), 2, "ellipse:<a>,<b>")?;
        FlattenedBody::new(v[0], v[1], delta)
    } else {
        Err(parse_err(format!("planar body `{src}`: expected disc:<r> or ellipse:<a>,<b>")))
    }
}

/// Parses `a,b,c` into a list of numbers.
pub fn parse_list(src: &str) -> Result<Vec<f64>> {
    numbers(src)
}

/// Parses a decimal or `0x`-prefixed hexadecimal seed.
pub fn parse_seed(src: &str) -> Result<u64> {
    let s = src.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|_| parse_err(format!("invalid seed `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::unit_vector;

    #[test]
    fn polynomial_sums_keep_inner_plus_signs() {
        let f = parse_function("poly:\"x1^2 + x2\" + 2*const:1.5", 3).unwrap();
        let u = unit_vector(3, 0);
        assert!((f.value(&u) - 4.0).abs() < 1e-12);
        let g = parse_function("poly:x1 + x2 + 0.5*support:ball:2", 3).unwrap();
        assert!((g.value(&unit_vector(3, 1)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn support_and_body_specs() {
        let h = parse_function("support:ellipsoid:1,4,9", 3).unwrap();
        assert!((h.value(&unit_vector(3, 2)) - 3.0).abs() < 1e-12);
        let k = parse_body("ball:1 + 2*ellipsoid:1,1,4", 3).unwrap();
        assert!((k.h().value(&unit_vector(3, 2)) - 5.0).abs() < 1e-12);
        assert!(k.is_certified());
        assert!(parse_body("ellipsoid:1,2", 3).is_err());
        assert!(parse_body("cube:1", 3).is_err());
        let c = parse_body("combine:1,ellipsoid:1,1,4,2,ball:1", 3).unwrap();
        assert!((c.h().value(&unit_vector(3, 2)) - 4.0).abs() < 1e-12);
        let p = parse_body("perturb:ball:1,poly:x3^2,0.1", 3).unwrap();
        assert!((p.h().value(&unit_vector(3, 2)) - 1.1).abs() < 1e-12);
        assert!(parse_body("perturb:ball:1,poly:x3^2,50", 3).is_err());
    }

    #[test]
    fn flat_bodies_and_seeds() {
        assert!((parse_flat("disc:1", 0.05).unwrap().a - 1.0).abs() < 1e-15);
        assert!(parse_flat("square:1", 0.05).is_err());
        assert_eq!(parse_seed("0xC0FFEE").unwrap(), 0xC0FFEE);
        assert_eq!(parse_seed("42").unwrap(), 42);
        let b = parse_function("bump:0,0,2,10", 3).unwrap();
        assert!(b.value(&unit_vector(3, 2)) > 0.0);
    }
}
