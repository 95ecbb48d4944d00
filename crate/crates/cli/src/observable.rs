// SPDX-License-Identifier: Apache-2.0

//! Text form of trigonometric observables.
//!
//! Terms are joined by `+`; each is `[coef*]name(k1,k2)` with name one of
//! `cos`, `sin`, `e` (the character `e^{2πi k·x}`), or a bare real constant.
//! A leading `-` negates a term. Example: `cos(1,1)+0.5*sin(2,-1)`.

use anosov_core::Observable;
use num_complex::Complex64;

fn split_terms(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' if depth == 0 && i > start => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_term(t: &str) -> Result<Observable, String> {
    let t = t.trim();
    if t.is_empty() {
        return Err("empty term".into());
    }
    if let Ok(c) = t.parse::<f64>() {
        return Ok(Observable::constant(c));
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, t),
    };
    let (coef, call) = match body.split_once('*') {
        Some((c, rest)) => (c.trim().parse::<f64>().map_err(|_| format!("bad coefficient in '{t}'"))?, rest.trim()),
        None => (1.0, body),
    };
    let open = call.find('(').ok_or_else(|| format!("expected name(k1,k2) in '{t}'"))?;
    let inner = call[open + 1..].strip_suffix(')').ok_or_else(|| format!("unclosed parenthesis in '{t}'"))?;
    let k: Vec<i64> = inner
        .split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|_| format!("bad frequency in '{t}'")))
        .collect::<Result<_, _>>()?;
    if k.len() != 2 {
        return Err(format!("need two frequencies in '{t}'"));
    }
    let k = [k[0], k[1]];
    let base = match call[..open].trim() {
        "cos" => Observable::cos(k),
        "sin" => Observable::sin(k),
        "e" => Observable::character(k),
        other => return Err(format!("unknown function '{other}'")),
    };
    let a = sign * coef;
    if a == 1.0 {
        Ok(base)
    } else {
        let mut o = base.scaled(Complex64::new(a, 0.0));
        o.label = t.to_string();
        Ok(o)
    }
}

pub fn parse(s: &str) -> Result<Observable, String> {
    let mut acc: Option<Observable> = None;
    for term in split_terms(s) {
        let o = parse_term(term)?;
        acc = Some(match acc {
            Some(a) => a.sum(&o),
            None => o,
        });
    }
    let mut o = acc.expect("at least one term");
    o.label = s.trim().to_string();
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use anosov_core::maps::LiftPoint;

    #[test]
    fn sums_and_coefficients() {
        let f = parse("cos(1,1)+0.5*sin(2,-1)").unwrap();
        let x = LiftPoint::new(0.13, 0.71);
        let tau = std::f64::consts::TAU;
        let want = (tau * (0.13 + 0.71)).cos() + 0.5 * (tau * (0.26 - 0.71)).sin();
        assert!((f.eval(&x).re - want).abs() < 1e-14);
        assert_eq!(f.label, "cos(1,1)+0.5*sin(2,-1)");
    }

    #[test]
    fn constants_and_negation() {
        let f = parse("-cos(1,0) + 2").unwrap();
        assert_eq!(f.lebesgue_mean().re, 2.0);
        let x = LiftPoint::new(0.0, 0.4);
        assert!((f.eval(&x).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("tan(1,0)").is_err());
        assert!(parse("cos(1)").is_err());
        assert!(parse("cos(1,0").is_err());
        assert!(parse("x*cos(1,0)").is_err());
    }
}
