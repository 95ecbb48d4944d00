// SPDX-License-Identifier: Apache-2.0

//! Exact integer arithmetic for the periodic points of a toral automorphism.
//!
//! `Fix A^n` is the finite group `(A^n - I)^{-1} Z^2 / Z^2`. With
//! `D = |det(A^n - I)|` every element is `p / D` for an integer vector `p`,
//! and the admissible numerators form the lattice `adj(A^n - I) Z^2`.

use crate::error::{Error, Result};
use crate::maps::{IntegerMatrix2, TorusPoint};

/// `|det(A^n - I)|` in exact arithmetic.
pub fn fixed_point_count_linear(a: &IntegerMatrix2, n: u32) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    if !a.is_hyperbolic() {
        return Err(Error::NotHyperbolic { trace: a.trace(), det: a.det() });
    }
    let overflow = || Error::Overflow { n, limit: overflow_limit(a) };
    let p = a.checked_pow(n).ok_or_else(overflow)?;
    // det(P - I) = 1 + det P - tr P for 2x2 matrices
    let tr = p.a.checked_add(p.d).ok_or_else(overflow)?;
    let det = p.det();
    let v = (1 + det).checked_sub(tr).ok_or_else(overflow)?;
    Ok(v.unsigned_abs())
}

/// Largest period whose count and lattice arithmetic stay inside i64.
pub fn overflow_limit(a: &IntegerMatrix2) -> u32 {
    let mut n = 1;
    loop {
        let ok = a.checked_pow(n + 1).and_then(|p| {
            let t = p.a.checked_add(p.d)?;
            let m = p.a.abs().max(p.b.abs()).max(p.c.abs()).max(p.d.abs());
            // numerator arithmetic multiplies entries of A by values below D
            m.checked_mul(8)?;
            t.checked_mul(64)
        });
        if ok.is_none() || n >= 60 {
            return n;
        }
        n += 1;
    }
}

/// A cycle of `A` acting on `Fix A^n`, as numerators over the common
/// denominator. `offsets[k] = A p_k / D - p_{k+1} / D` is the integer vector
/// dropped when reducing the image back to the unit square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCycle {
    pub numerators: Vec<[i64; 2]>,
    pub offsets: Vec<[i64; 2]>,
}

#[derive(Debug, Clone)]
pub struct LinearFixedSet {
    pub denominator: i64,
    pub cycles: Vec<LinearCycle>,
}

impl LinearFixedSet {
    pub fn len(&self) -> usize {
        self.cycles.iter().map(|c| c.numerators.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        let d = self.denominator as f64;
        let mut pts: Vec<TorusPoint> = self
            .cycles
            .iter()
            .flat_map(|c| c.numerators.iter().map(move |p| TorusPoint::new(p[0] as f64 / d, p[1] as f64 / d)))
            .collect();
        sort_points(&mut pts);
        pts
    }
}

pub fn sort_points(pts: &mut [TorusPoint]) {
    pts.sort_by(|p, q| p.x1().total_cmp(&q.x1()).then(p.x2().total_cmp(&q.x2())));
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    // returns (g, x, y) with a x + b y = g >= 0
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// All numerators `p in [0, D)^2` with `(A^n - I) p ≡ 0 (mod D)`.
fn fixed_numerators(a: &IntegerMatrix2, n: u32) -> Result<(i64, Vec<[i64; 2]>)> {
    let count = fixed_point_count_linear(a, n)?;
    let big_d = count as i64;
    let p = a.checked_pow(n).expect("checked by count");
    let (bp, bq, br, bs) = (p.a - 1, p.b, p.c, p.d - 1);
    // columns of adj(B): (bs, -br) and (-bq, bp)
    let (c, alpha, beta) = ext_gcd(-br, bp);
    let first = (alpha as i128 * bs as i128 - beta as i128 * bq as i128).rem_euclid(i128::from(big_d)) as i64;
    let a_step = big_d / c;
    let b_shift = first.rem_euclid(a_step);
    let mut out = Vec::with_capacity(count as usize);
    for j in 0..(big_d / c) {
        let y = j * c;
        let x0 = ((j as i128 * b_shift as i128).rem_euclid(a_step as i128)) as i64;
        for i in 0..(big_d / a_step) {
            out.push([x0 + i * a_step, y]);
        }
    }
    debug_assert_eq!(out.len() as u64, count);
    Ok((big_d, out))
}

/// Decomposes `Fix A^n` into cycles of `A`.
pub fn linear_fixed_set(a: &IntegerMatrix2, n: u32) -> Result<LinearFixedSet> {
    let (big_d, nums) = fixed_numerators(a, n)?;
    let mut index = std::collections::HashMap::with_capacity(nums.len());
    for (k, p) in nums.iter().enumerate() {
        index.insert(*p, k);
    }
    let step = |p: &[i64; 2]| -> ([i64; 2], [i64; 2]) {
        let ap = a.apply(*p);
        let next = [ap[0].rem_euclid(big_d), ap[1].rem_euclid(big_d)];
        let off = [ap[0].div_euclid(big_d), ap[1].div_euclid(big_d)];
        (next, off)
    };
    let mut seen = vec![false; nums.len()];
    let mut cycles = Vec::new();
    for start in 0..nums.len() {
        if seen[start] {
            continue;
        }
        let mut numerators = Vec::new();
        let mut offsets = Vec::new();
        let mut k = start;
        loop {
            seen[k] = true;
            numerators.push(nums[k]);
            let (next, off) = step(&nums[k]);
            offsets.push(off);
            k = *index.get(&next).ok_or_else(|| Error::Parse("lattice not invariant under A".into()))?;
            if k == start {
                break;
            }
        }
        cycles.push(LinearCycle { numerators, offsets });
    }
    Ok(LinearFixedSet { denominator: big_d, cycles })
}

/// Sorted fixed points of `A^n` in `[0, 1)^2`.
pub fn enumerate_fixed_points_linear(a: &IntegerMatrix2, n: u32) -> Result<Vec<TorusPoint>> {
    Ok(linear_fixed_set(a, n)?.points())
}
