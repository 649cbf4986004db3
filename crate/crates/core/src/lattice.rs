//! Cubes in ℤ^ν, canonical site enumeration and sparse support sets.
//!
//! Distances are max-norm distances throughout, so a cube of half-side `L`
//! around `c` is exactly the closed ball `{n : |n - c|_∞ ≤ L}`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of ℤ^ν.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(SmallVec<[i64; 5]>);

impl Site {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        Site(coords.into_iter().collect())
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `|n|_∞`
    pub fn max_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn distance(&self, other: &Site) -> u64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn offset(&self, d: &[i64]) -> Site {
        Site(self.0.iter().zip(d).map(|(a, b)| a + b).collect())
    }

    pub fn difference(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site(SmallVec::from_vec(v))
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(v: [i64; N]) -> Self {
        Site(v.iter().copied().collect())
    }
}

/// Closed max-norm ball `center ± half_side` on every axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    center: Site,
    half_side: u32,
}

impl Cube {
    pub fn new(center: Site, half_side: u32) -> Result<Self> {
        if center.dim() == 0 {
            return Err(Error::invalid("cube dimension must be at least 1"));
        }
        Ok(Cube { center, half_side })
    }

    /// Cube centred at the origin of ℤ^`dim`.
    pub fn centered(dim: usize, half_side: u32) -> Result<Self> {
        Cube::new(Site::origin(dim), half_side)
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn half_side(&self) -> u32 {
        self.half_side
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn side(&self) -> u64 {
        2 * self.half_side as u64 + 1
    }

    /// `|Λ| = (2L+1)^ν`
    pub fn volume(&self) -> u64 {
        self.side().pow(self.dim() as u32)
    }

    pub fn contains(&self, n: &Site) -> bool {
        n.dim() == self.dim() && self.center.distance(n) <= self.half_side as u64
    }

    /// Max-norm distance from `n` to the cube boundary (0 on the boundary).
    pub fn depth(&self, n: &Site) -> u64 {
        self.half_side as u64 - self.center.distance(n)
    }

    /// Linear index in the canonical lexicographic order, first axis most
    /// significant.
    pub fn index_of(&self, n: &Site) -> Option<usize> {
        if !self.contains(n) {
            return None;
        }
        let side = self.side() as i64;
        let mut idx: i64 = 0;
        for (c, x) in self.center.coords().iter().zip(n.coords()) {
            idx = idx * side + (x - c + self.half_side as i64);
        }
        Some(idx as usize)
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        let side = self.side() as usize;
        let mut coords: SmallVec<[i64; 5]> = SmallVec::from_elem(0, self.dim());
        for axis in (0..self.dim()).rev() {
            coords[axis] = self.center.coords()[axis] + (idx % side) as i64 - self.half_side as i64;
            idx /= side;
        }
        Site(coords)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume() as usize).map(move |i| self.site_at(i))
    }

    /// Concentric sub-cube of half-side `half_side` (clamped to this cube).
    pub fn sub_cube(&self, half_side: u32) -> Cube {
        Cube {
            center: self.center.clone(),
            half_side: half_side.min(self.half_side),
        }
    }

    /// Centred sub-cubes with half-sides 0, 1, 2, 4, 8, … and the cube itself.
    pub fn dyadic_sub_cubes(&self) -> Vec<Cube> {
        let mut out = vec![self.sub_cube(0)];
        let mut l = 1u32;
        while l < self.half_side {
            out.push(self.sub_cube(l));
            l *= 2;
        }
        if self.half_side > 0 {
            out.push(self.clone());
        }
        out
    }
}

/// All sites of `cube` in canonical lexicographic order.
pub fn cube_sites(cube: &Cube) -> Result<Vec<Site>> {
    if cube.dim() == 0 {
        return Err(Error::invalid("cube dimension must be at least 1"));
    }
    Ok(cube.sites().collect())
}

/// `⌈|Λ|^α⌉`, with values within 1e-9 (relative) of an integer treated as
/// that integer so exact powers do not round up spuriously.
pub fn sparseness_cap(volume: u64, alpha: f64) -> u64 {
    let x = (volume as f64).powf(alpha);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Deduplicated, canonically ordered set of sites with O(1) membership.
#[derive(Clone, Debug, Default)]
pub struct SiteSet {
    sites: Vec<Site>,
    lookup: HashSet<Site>,
}

impl SiteSet {
    pub fn new(sites: impl IntoIterator<Item = Site>) -> Self {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort();
        sites.dedup();
        let lookup = sites.iter().cloned().collect();
        SiteSet { sites, lookup }
    }

    pub fn empty() -> Self {
        SiteSet::default()
    }

    /// Every site of `cube`.
    pub fn full(cube: &Cube) -> Self {
        SiteSet::new(cube.sites())
    }

    pub fn contains(&self, n: &Site) -> bool {
        self.lookup.contains(n)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn as_slice(&self) -> &[Site] {
        &self.sites
    }

    pub fn count_in(&self, cube: &Cube) -> u64 {
        self.sites.iter().filter(|n| cube.contains(n)).count() as u64
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    DeterministicPowers,
    BernoulliThinned,
    ExplicitList,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::DeterministicPowers => "deterministic_powers",
            Generator::BernoulliThinned => "bernoulli_thinned",
            Generator::ExplicitList => "explicit_list",
        }
    }
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic_powers" => Ok(Generator::DeterministicPowers),
            "bernoulli_thinned" => Ok(Generator::BernoulliThinned),
            "explicit_list" => Ok(Generator::ExplicitList),
            other => Err(Error::invalid(format!("unknown generator '{other}'"))),
        }
    }
}

/// A support set inside an explicit cube, tagged with its sparseness
/// exponent.
#[derive(Clone, Debug)]
pub struct SparseSet {
    set: SiteSet,
    alpha: f64,
    generator: Generator,
    seed: u64,
    cube: Cube,
}

/// One row of a cap check.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub volume: u64,
    pub count: u64,
    pub cap: u64,
    pub pass: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

impl SparseSet {
    /// Wrap an explicit site list. Sites must lie in `cube`; the cap is not
    /// enforced here (see [`SparseSet::centered_violations`]).
    pub fn from_sites(alpha: f64, cube: Cube, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        check_alpha(alpha)?;
        let set = SiteSet::new(sites);
        if let Some(bad) = set.iter().find(|n| !cube.contains(n)) {
            return Err(Error::invalid(format!("site {bad:?} lies outside the cube")));
        }
        Ok(SparseSet {
            set,
            alpha,
            generator: Generator::ExplicitList,
            seed: 0,
            cube,
        })
    }

    pub fn sites(&self) -> &SiteSet {
        &self.set
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Half-sides `ℓ` of centred sub-cubes on which the cap fails.
    pub fn centered_violations(&self) -> Vec<u32> {
        let hist = radius_histogram(&self.set, &self.cube);
        let mut count = 0u64;
        let mut bad = Vec::new();
        for (l, h) in hist.iter().enumerate() {
            count += h;
            let vol = (2 * l as u64 + 1).pow(self.cube.dim() as u32);
            if count > sparseness_cap(vol, self.alpha) {
                bad.push(l as u32);
            }
        }
        bad
    }

    pub fn profile(&self, cubes: &[Cube]) -> Result<Vec<ProfileRow>> {
        sparseness_profile(&self.set, self.alpha, cubes)
    }

    /// Line-oriented text form: a `# alpha=… generator=… seed=… nu=…`
    /// header followed by one site per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# alpha={} generator={} seed={} nu={}\n",
            self.alpha,
            self.generator.name(),
            self.seed,
            self.cube.dim()
        );
        for n in self.set.iter() {
            let line: Vec<String> = n.coords().iter().map(|c| c.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the text form; the enclosing cube is not part of the format and
    /// must be supplied.
    pub fn from_text(text: &str, cube: Cube) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty sparse-set text"))?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::invalid("missing '#' header line"))?;
        let (mut alpha, mut generator, mut seed, mut nu) = (None, None, None, None);
        for field in body.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed header field '{field}'")))?;
            let bad = |_| Error::invalid(format!("bad value for '{k}': '{v}'"));
            match k {
                "alpha" => alpha = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "generator" => generator = Some(v.parse::<Generator>()?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "nu" => nu = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::invalid(format!("unknown header key '{k}'"))),
            }
        }
        let missing = |k: &str| Error::invalid(format!("header lacks '{k}'"));
        let alpha = alpha.ok_or_else(|| missing("alpha"))?;
        let generator = generator.ok_or_else(|| missing("generator"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let nu = nu.ok_or_else(|| missing("nu"))?;
        if nu != cube.dim() {
            return Err(Error::invalid(format!(
                "header nu={nu} but cube has dimension {}",
                cube.dim()
            )));
        }
        let mut sites = Vec::new();
        for line in lines {
            let coords = line
                .split_whitespace()
                .map(|t| t.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("bad site line '{line}': {e}")))?;
            if coords.len() != nu {
                return Err(Error::invalid(format!("site line '{line}' has wrong arity")));
            }
            sites.push(Site::from(coords));
        }
        let mut set = SparseSet::from_sites(alpha, cube, sites)?;
        set.generator = generator;
        set.seed = seed;
        Ok(set)
    }
}

fn radius_histogram(set: &SiteSet, cube: &Cube) -> Vec<u64> {
    let mut hist = vec![0u64; cube.half_side() as usize + 1];
    for n in set {
        hist[cube.center().distance(n) as usize] += 1;
    }
    hist
}

/// Cap table `(|Λ|, |S∩Λ|, ⌈|Λ|^α⌉, pass)` for each cube.
pub fn sparseness_profile(set: &SiteSet, alpha: f64, cubes: &[Cube]) -> Result<Vec<ProfileRow>> {
    if cubes.is_empty() {
        return Err(Error::invalid("at least one cube is required"));
    }
    Ok(cubes
        .iter()
        .map(|c| {
            let count = set.count_in(c);
            let cap = sparseness_cap(c.volume(), alpha);
            ProfileRow {
                volume: c.volume(),
                count,
                cap,
                pass: count <= cap,
            }
        })
        .collect())
}

/// Generate a sparse set satisfying `|S ∩ Λ_ℓ| ≤ ⌈|Λ_ℓ|^α⌉` on every
/// centred sub-cube `Λ_ℓ` of `cube`.
///
/// * `DeterministicPowers` fills shells of radius `⌊ρ^j⌋`, `ρ = 2^{1/(να)}`,
///   with points `r·e` for directions `e ∈ {-1,0,1}^ν` (fewest nonzero
///   coordinates first), as far as the cap allows. The seed is ignored.
/// * `BernoulliThinned` includes each site at radius `r` independently with
///   probability `min(1, q r^{ν(α-1)})` and rejects draws that would break
///   the cap.
pub fn generate_sparse_set(alpha: f64, cube: &Cube, generator: Generator, seed: u64) -> Result<SparseSet> {
    check_alpha(alpha)?;
    let sites = match generator {
        Generator::DeterministicPowers => deterministic_powers(alpha, cube),
        Generator::BernoulliThinned => bernoulli_thinned(alpha, cube, seed),
        Generator::ExplicitList => {
            return Err(Error::invalid(
                "explicit_list sets are built with SparseSet::from_sites",
            ))
        }
    };
    Ok(SparseSet {
        set: SiteSet::new(sites),
        alpha,
        generator,
        seed: if generator == Generator::DeterministicPowers { 0 } else { seed },
        cube: cube.clone(),
    })
}

fn shell_cap(r: u64, dim: usize, alpha: f64) -> u64 {
    sparseness_cap((2 * r + 1).pow(dim as u32), alpha)
}

/// Directions in {-1,0,1}^ν \ {0}, ordered by support size then
/// lexicographically.
fn shell_directions(dim: usize) -> Vec<Vec<i64>> {
    let total = 3usize.pow(dim as u32);
    let mut dirs: Vec<Vec<i64>> = (0..total)
        .map(|mut k| {
            let mut d = vec![0i64; dim];
            for slot in d.iter_mut().rev() {
                *slot = (k % 3) as i64 - 1;
                k /= 3;
            }
            d
        })
        .filter(|d| d.iter().any(|&x| x != 0))
        .collect();
    dirs.sort_by_key(|d| (d.iter().filter(|&&x| x != 0).count(), d.clone()));
    dirs
}

fn deterministic_powers(alpha: f64, cube: &Cube) -> Vec<Site> {
    let dim = cube.dim();
    let rho = 2f64.powf(1.0 / (dim as f64 * alpha));
    let l = cube.half_side() as u64;
    let mut radii = vec![0u64];
    let mut x = 1.0f64;
    while (x.floor() as u64) <= l {
        let r = x.floor() as u64;
        if *radii.last().unwrap() != r {
            radii.push(r);
        }
        x *= rho;
    }
    let dirs = shell_directions(dim);
    let mut out = Vec::new();
    for r in radii {
        let budget = shell_cap(r, dim, alpha).saturating_sub(out.len() as u64);
        if r == 0 {
            if budget > 0 {
                out.push(cube.center().clone());
            }
            continue;
        }
        for d in dirs.iter().take(budget as usize) {
            let step: Vec<i64> = d.iter().map(|&e| e * r as i64).collect();
            out.push(cube.center().offset(&step));
        }
    }
    out
}

fn bernoulli_thinned(alpha: f64, cube: &Cube, seed: u64) -> Vec<Site> {
    let dim = cube.dim();
    let nu = dim as f64;
    let q = alpha * 2f64.powf(nu * alpha) / 2f64.powf(nu + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Site> = Vec::new();
    for r in 0..=cube.half_side() as u64 {
        let shell_size = if r == 0 {
            1
        } else {
            (2 * r + 1).pow(dim as u32) - (2 * r - 1).pow(dim as u32)
        };
        let p = if r == 0 { 1.0 } else { (q * (r as f64).powf(nu * (alpha - 1.0))).min(1.0) };
        let draws = Binomial::new(shell_size, p)
            .expect("valid binomial parameters")
            .sample(&mut rng);
        let budget = shell_cap(r, dim, alpha).saturating_sub(out.len() as u64);
        let keep = draws.min(budget);
        let mut chosen: Vec<Site> = Vec::with_capacity(keep as usize);
        let mut seen = HashSet::new();
        let side = 2 * r as i64 + 1;
        while (chosen.len() as u64) < keep {
            // uniform point of the shell by rejection from the enclosing cube
            let coords: Vec<i64> = (0..dim).map(|_| rng.random_range(0..side) - r as i64).collect();
            if coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) != r {
                continue;
            }
            if seen.insert(coords.clone()) {
                chosen.push(cube.center().offset(&coords));
            }
        }
        out.extend(chosen);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_enumeration() {
        let c = Cube::centered(1, 1).unwrap();
        let s = cube_sites(&c).unwrap();
        assert_eq!(s, vec![Site::from([-1]), Site::from([0]), Site::from([1])]);
    }

    #[test]
    fn single_site_cube() {
        let c = Cube::centered(2, 0).unwrap();
        assert_eq!(cube_sites(&c).unwrap(), vec![Site::from([0, 0])]);
    }

    #[test]
    fn lexicographic_first_and_last() {
        let c = Cube::new(Site::from([1, 1]), 1).unwrap();
        let s = cube_sites(&c).unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s[0], Site::from([0, 0]));
        assert_eq!(s[8], Site::from([2, 2]));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Cube::new(Site::new(Vec::<i64>::new()), 1).is_err());
    }

    #[test]
    fn cap_arithmetic() {
        assert_eq!(sparseness_cap(225, 0.25), 4);
        assert_eq!(sparseness_cap(1, 0.7), 1);
        assert_eq!(sparseness_cap(100, 0.5), 10);
        assert_eq!(sparseness_cap(61u64.pow(5), 0.25), 171);
    }

    #[test]
    fn alpha_out_of_range() {
        let c = Cube::centered(2, 3).unwrap();
        for a in [0.0, 1.0, -0.2, 1.5] {
            assert!(generate_sparse_set(a, &c, Generator::DeterministicPowers, 0).is_err());
        }
    }

    #[test]
    fn trivial_cube_gives_at_most_center() {
        let c = Cube::centered(3, 0).unwrap();
        for g in [Generator::DeterministicPowers, Generator::BernoulliThinned] {
            let s = generate_sparse_set(0.4, &c, g, 9).unwrap();
            assert!(s.len() <= 1);
            assert!(s.sites().iter().all(|n| n == c.center()));
        }
    }

    #[test]
    fn small_cube_cap() {
        let c = Cube::centered(2, 7).unwrap();
        let s = generate_sparse_set(0.25, &c, Generator::DeterministicPowers, 0).unwrap();
        assert!(s.len() <= 4);
        assert!(s.centered_violations().is_empty());
    }

    #[test]
    fn empty_set_profile_passes() {
        let c = Cube::centered(2, 4).unwrap();
        let rows = sparseness_profile(&SiteSet::empty(), 0.3, &c.dyadic_sub_cubes()).unwrap();
        assert!(rows.iter().all(|r| r.count == 0 && r.pass));
    }

    #[test]
    fn full_set_violates_cap() {
        let c = Cube::new(Site::from([0, 0]), 0).unwrap();
        // |Λ| = 100 needs a 10×10 box; use an explicit full set in a larger cube.
        let big = Cube::centered(2, 5).unwrap();
        let sites: Vec<Site> = (-5..5)
            .flat_map(|x| (-5..5).map(move |y| Site::from([x, y])))
            .collect();
        let set = SiteSet::new(sites);
        assert_eq!(set.len(), 100);
        let rows = sparseness_profile(&set, 0.5, &[big.clone()]).unwrap();
        assert_eq!(rows[0].count, 100);
        assert!(!rows[0].pass);
        let _ = c;
    }

    #[test]
    fn profile_requires_cubes() {
        assert!(sparseness_profile(&SiteSet::empty(), 0.5, &[]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let c = Cube::new(Site::from([2, -1, 0]), 2).unwrap();
        for i in 0..c.volume() as usize {
            assert_eq!(c.index_of(&c.site_at(i)), Some(i));
        }
        assert_eq!(c.index_of(&Site::from([10, 0, 0])), None);
    }

    #[test]
    fn text_format_round_trip() {
        let c = Cube::centered(3, 9).unwrap();
        let s = generate_sparse_set(0.3, &c, Generator::BernoulliThinned, 17).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("# alpha=0.3 generator=bernoulli_thinned seed=17 nu=3\n"));
        let back = SparseSet::from_text(&text, c).unwrap();
        assert_eq!(back.sites().as_slice(), s.sites().as_slice());
        assert_eq!(back.generator(), Generator::BernoulliThinned);
        assert_eq!(back.seed(), 17);
    }

    #[test]
    fn text_rejects_arity_mismatch() {
        let c = Cube::centered(2, 3).unwrap();
        let text = "# alpha=0.3 generator=explicit_list seed=0 nu=2\n1 2 3\n";
        assert!(SparseSet::from_text(text, c).is_err());
    }

    #[test]
    fn explicit_sites_outside_cube_rejected() {
        let c = Cube::centered(1, 2).unwrap();
        assert!(SparseSet::from_sites(0.5, c, vec![Site::from([3])]).is_err());
    }
}
