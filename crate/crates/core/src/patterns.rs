//! Restricted-permutation patterns on a finite window.
//!
//! A pattern on `F` assigns a displacement `x_s in A` to every `s in F` and
//! induces `phi(s) = s + x_s`. Three families are enumerated:
//!
//! - injective patterns (`phi` injective),
//! - admissible patterns (injective, and `phi(F)` covers the interior
//!   `{t : t - A subset of F}`),
//! - patterns with a prescribed image `F'`.
//!
//! Enumeration is depth first over `F` in lexicographic order, trying
//! displacements in the lexicographic order of `A`, so streams are deterministic.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::group_ring::{LatticePoint, Window};

const NONE: usize = usize::MAX;

/// The bipartite structure shared by every pattern on `(A, F)`: rows are the
/// points of `F`, columns the points of `FA`.
#[derive(Clone, Debug)]
pub struct PatternSpace {
    alphabet: Window,
    window: Window,
    cols: Window,
    /// `targets[i][k]` is the column of `F[i] + A[k]`.
    targets: Vec<Vec<usize>>,
    /// Columns of the interior, sorted.
    required: Vec<usize>,
}

impl PatternSpace {
    pub fn new(alphabet: &Window, window: &Window) -> Result<Self> {
        if alphabet.dim() != window.dim() {
            return Err(Error::DimensionMismatch {
                expected: window.dim(),
                found: alphabet.dim(),
            });
        }
        let cols = window.dilate(alphabet);
        let targets = window
            .iter()
            .map(|s| {
                alphabet
                    .iter()
                    .map(|a| cols.index_of(&(s + a)).expect("s + a lies in FA"))
                    .collect()
            })
            .collect();
        let required = window
            .interior(alphabet)
            .iter()
            .map(|t| cols.index_of(t).expect("interior lies in FA"))
            .collect();
        Ok(PatternSpace {
            alphabet: alphabet.clone(),
            window: window.clone(),
            cols,
            targets,
            required,
        })
    }

    pub fn alphabet(&self) -> &Window {
        &self.alphabet
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// The column set `FA`.
    pub fn cols(&self) -> &Window {
        &self.cols
    }

    pub fn rows(&self) -> usize {
        self.window.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn targets(&self) -> &[Vec<usize>] {
        &self.targets
    }

    pub fn required(&self) -> &[usize] {
        &self.required
    }

    /// Converts a target set `F'` to sorted column indices after checking
    /// `F' subset of FA` and `|F'| = |F|`.
    pub fn target_columns(&self, image: &Window) -> Result<Vec<usize>> {
        if image.len() != self.rows() {
            return Err(Error::InvalidTargetSet(format!(
                "|F'| = {} but |F| = {}",
                image.len(),
                self.rows()
            )));
        }
        image
            .iter()
            .map(|t| {
                self.cols
                    .index_of(t)
                    .ok_or_else(|| Error::InvalidTargetSet(format!("{t} is not in FA")))
            })
            .collect()
    }

    pub fn injective(&self) -> PatternIter<'_> {
        PatternIter::new(self, None, &[])
    }

    pub fn admissible(&self) -> PatternIter<'_> {
        PatternIter::new(self, None, &self.required)
    }

    /// Patterns with `phi(F) = F'`.
    pub fn with_image(&self, image: &Window) -> Result<PatternIter<'_>> {
        let cols = self.target_columns(image)?;
        let mut allowed = vec![false; self.num_cols()];
        for &c in &cols {
            allowed[c] = true;
        }
        Ok(PatternIter::new(self, Some(allowed), &cols))
    }

    /// Candidate images: all `F' subset of FA` with `|F'| = |F|`, optionally
    /// required to contain the interior. Lexicographic in column order.
    pub fn theta(&self, require_interior: bool) -> impl Iterator<Item = Window> + '_ {
        let mut is_required = vec![false; self.num_cols()];
        if require_interior {
            for &c in &self.required {
                is_required[c] = true;
            }
        }
        let n_req = if require_interior { self.required.len() } else { 0 };
        (0..self.num_cols())
            .combinations(self.rows())
            .filter(move |set| set.iter().filter(|&&c| is_required[c]).count() == n_req)
            .map(move |set| {
                Window::from_points(set.iter().map(|&c| self.cols.points()[c].clone()).collect())
                    .expect("distinct columns")
            })
    }

    /// `sgn(psi o phi)` with `psi: F' -> F` the increasing bijection.
    pub fn sign(&self, pattern: &Pattern, image: &Window) -> Result<i8> {
        let cols = self.target_columns(image)?;
        let mut sorted_img = pattern.cols.clone();
        sorted_img.sort_unstable();
        if sorted_img != cols {
            return Err(Error::ImageMismatch);
        }
        Ok(pattern.sign())
    }

    /// `sgn(psi o phi)` for a caller-supplied bijection `psi: F' -> F`, given
    /// as `psi[j]` = row index assigned to the `j`-th smallest point of `F'`.
    pub fn sign_with(&self, pattern: &Pattern, image: &Window, psi: &[usize]) -> Result<i8> {
        let cols = self.target_columns(image)?;
        if psi.len() != cols.len() || !is_permutation(psi) {
            return Err(Error::InvalidParameters("psi is not a bijection".into()));
        }
        let mut perm = Vec::with_capacity(pattern.cols.len());
        for &c in &pattern.cols {
            let j = cols.binary_search(&c).map_err(|_| Error::ImageMismatch)?;
            perm.push(psi[j]);
        }
        Ok(permutation_sign(&perm))
    }

    /// Displacement of row `i` under `pattern`.
    pub fn displacement(&self, pattern: &Pattern, i: usize) -> &LatticePoint {
        &self.alphabet.points()[pattern.choices[i]]
    }

    /// The image `phi(F)` as a window.
    pub fn image(&self, pattern: &Pattern) -> Window {
        Window::from_points(
            pattern
                .cols
                .iter()
                .map(|&c| self.cols.points()[c].clone())
                .collect(),
        )
        .expect("injective pattern")
    }
}

/// One pattern: per row of `F`, the index of its displacement in `A` and of
/// its target column in `FA`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub choices: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    /// Sign of `psi o phi` with `psi` increasing: the permutation of `F`
    /// sending row `i` to the rank of its target among the image.
    pub fn sign(&self) -> i8 {
        let mut order: Vec<usize> = (0..self.cols.len()).collect();
        order.sort_unstable_by_key(|&i| self.cols[i]);
        let mut perm = vec![0; self.cols.len()];
        for (rank, &i) in order.iter().enumerate() {
            perm[i] = rank;
        }
        permutation_sign(&perm)
    }

    /// Bitmask of the image columns; requires fewer than 128 columns.
    pub fn image_mask(&self) -> u128 {
        self.cols.iter().fold(0u128, |m, &c| m | (1u128 << c))
    }
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &v in p {
        if v >= p.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// Parity of a permutation of `0..n` via its cycle decomposition.
pub fn permutation_sign(perm: &[usize]) -> i8 {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
        }
    }
    if (n - cycles).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Depth-first pattern stream.
pub struct PatternIter<'a> {
    space: &'a PatternSpace,
    allowed: Option<Vec<bool>>,
    /// Required columns whose last possible source is row `i`.
    closing: Vec<Vec<usize>>,
    used: Vec<bool>,
    choice: Vec<usize>,
    depth: usize,
    done: bool,
}

impl<'a> PatternIter<'a> {
    fn new(space: &'a PatternSpace, allowed: Option<Vec<bool>>, required: &[usize]) -> Self {
        let n = space.rows();
        let mut closing = vec![Vec::new(); n];
        let mut last_source = vec![NONE; space.num_cols()];
        for (i, row) in space.targets.iter().enumerate() {
            for &c in row {
                last_source[c] = i;
            }
        }
        let mut done = false;
        for &c in required {
            match last_source[c] {
                NONE => done = true,
                i => closing[i].push(c),
            }
        }
        PatternIter {
            space,
            allowed,
            closing,
            used: vec![false; space.num_cols()],
            choice: vec![NONE; n],
            depth: 0,
            done,
        }
    }

    fn current(&self) -> Pattern {
        let cols = self
            .choice
            .iter()
            .enumerate()
            .map(|(i, &k)| self.space.targets[i][k])
            .collect();
        Pattern {
            choices: self.choice.clone(),
            cols,
        }
    }
}

impl Iterator for PatternIter<'_> {
    type Item = Pattern;

    fn next(&mut self) -> Option<Pattern> {
        let n = self.space.rows();
        loop {
            if self.done {
                return None;
            }
            let i = self.depth;
            let row = &self.space.targets[i];
            let mut k = if self.choice[i] == NONE {
                0
            } else {
                self.used[row[self.choice[i]]] = false;
                self.choice[i] + 1
            };
            while k < row.len() {
                let c = row[k];
                let ok = !self.used[c] && self.allowed.as_ref().is_none_or(|a| a[c]);
                if ok {
                    break;
                }
                k += 1;
            }
            if k == row.len() {
                self.choice[i] = NONE;
                if i == 0 {
                    self.done = true;
                    return None;
                }
                self.depth -= 1;
                continue;
            }
            self.choice[i] = k;
            self.used[row[k]] = true;
            if !self.closing[i].iter().all(|&c| self.used[c]) {
                continue;
            }
            if i + 1 == n {
                return Some(self.current());
            }
            self.depth += 1;
        }
    }
}
