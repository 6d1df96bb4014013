//! Independent oracles and random generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use permsft::{GroupRingElement, LatticePoint, Window};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn pt(v: &[i64]) -> LatticePoint {
    LatticePoint::new(v.to_vec())
}

/// `k` distinct points of `[lo, hi]^dim`.
pub fn random_points<R: Rng>(rng: &mut R, dim: usize, k: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut all: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..dim {
        all = all
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    all.shuffle(rng);
    all.truncate(k);
    all
}

pub fn random_window<R: Rng>(rng: &mut R, dim: usize, k: usize, lo: i64, hi: i64) -> Window {
    let pts = random_points(rng, dim, k, lo, hi);
    Window::from_points(pts.into_iter().map(LatticePoint::new).collect()).unwrap()
}

/// Nonnegative element on `points` with weights from `weight`.
pub fn element_on<R: Rng>(
    rng: &mut R,
    dim: usize,
    points: &[Vec<i64>],
    mut weight: impl FnMut(&mut R) -> f64,
) -> GroupRingElement {
    let terms: Vec<(LatticePoint, f64)> = points.iter().map(|p| (pt(p), weight(rng))).collect();
    GroupRingElement::from_terms(dim, terms).unwrap()
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Points `t` with `t - a` in `F` for every `a` in `A`.
pub fn naive_interior(alphabet: &[Vec<i64>], window: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let f: HashSet<&Vec<i64>> = window.iter().collect();
    let mut cands: BTreeSet<Vec<i64>> = BTreeSet::new();
    for s in window {
        for a in alphabet {
            cands.insert(add(s, a));
        }
    }
    cands
        .into_iter()
        .filter(|t| alphabet.iter().all(|a| f.contains(&sub(t, a))))
        .collect()
}

/// Brute force over all `|A|^|F|` fields `x: F -> A`, keeping the injective
/// ones (and, with `require_interior`, those covering the interior). Weights
/// come from `weight(a)`; the sum is returned as `(exact, float)`, with the
/// exact value present when every weight is an integer.
pub fn naive_permanent(
    alphabet: &[Vec<i64>],
    window: &[Vec<i64>],
    weight: impl Fn(&[i64]) -> f64,
    require_interior: bool,
) -> (Option<u128>, f64) {
    let k = alphabet.len();
    let n = window.len();
    let w: Vec<f64> = alphabet.iter().map(|a| weight(a)).collect();
    let integral = w.iter().all(|x| x.fract() == 0.0);
    let interior = naive_interior(alphabet, window);
    let mut choice = vec![0usize; n];
    let mut exact: u128 = 0;
    let mut float = 0.0f64;
    if n == 0 {
        return (Some(1), 1.0);
    }
    loop {
        let images: Vec<Vec<i64>> = (0..n).map(|i| add(&window[i], &alphabet[choice[i]])).collect();
        let set: HashSet<&Vec<i64>> = images.iter().collect();
        if set.len() == n && (!require_interior || interior.iter().all(|t| set.contains(t))) {
            let prod: f64 = choice.iter().map(|&c| w[c]).product();
            float += prod;
            if integral {
                exact += choice.iter().map(|&c| w[c] as u128).product::<u128>();
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return (integral.then_some(exact), float);
            }
            choice[i] += 1;
            if choice[i] < k {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

pub fn coords(w: &Window) -> Vec<Vec<i64>> {
    w.iter().map(|p| p.coords().to_vec()).collect()
}

/// Exact permanent of a small square matrix by expansion over permutations.
pub fn naive_square_permanent(m: &[Vec<u64>]) -> u128 {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0u128;
    loop {
        total += (0..n).map(|i| m[i][perm[i]] as u128).product::<u128>();
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return total;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// Window with a size drawn from `sizes`.
pub fn random_window_in<R: Rng>(
    rng: &mut R,
    dim: usize,
    sizes: std::ops::RangeInclusive<usize>,
    lo: i64,
    hi: i64,
) -> Window {
    let k = rng.gen_range(sizes);
    random_window(rng, dim, k, lo, hi)
}
