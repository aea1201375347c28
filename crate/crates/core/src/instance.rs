//! Problem instances: dataset placement, message index sets and channel draws.
//!
//! Files, users and messages are 0-based in this API. Message `j * N + n` is the
//! intermediate value of reduce task `j` computed on file `n`. The text format
//! written by [`ProblemInstance::to_text`] is 1-based.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, ComplexMatrix, C64};

/// File sets `F_k`, one per user, each sorted ascending.
pub type Placement = Vec<Vec<usize>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ChannelMode {
    /// `H_ki` drawn directly from CN(0, I).
    #[default]
    Direct,
    /// `H_ki = H_k^down H_i^up` through the access point.
    Composed,
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Direct => "direct",
            ChannelMode::Composed => "composed",
        })
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ChannelMode::Direct),
            "composed" => Ok(ChannelMode::Composed),
            other => Err(Error::InvalidInput(format!("unknown channel mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub mode: ChannelMode,
    /// Uplink `H_k^up` (M x L) per user; empty in direct mode.
    pub up: Vec<ComplexMatrix>,
    /// Downlink `H_k^down` (L x M) per user; empty in direct mode.
    pub down: Vec<ComplexMatrix>,
    /// `h[k][i]` is the L x L channel from user `i` to user `k`.
    pub h: Vec<Vec<ComplexMatrix>>,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h.len()
    }

    /// Assembles a composed channel set from its uplink and downlink factors.
    pub fn composed(up: Vec<ComplexMatrix>, down: Vec<ComplexMatrix>) -> Result<Self> {
        if up.len() != down.len() {
            return Err(Error::InvalidInput(format!(
                "{} uplink matrices but {} downlink matrices",
                up.len(),
                down.len()
            )));
        }
        let h = down
            .iter()
            .map(|dk| up.iter().map(|ui| dk * ui).collect())
            .collect();
        Ok(ChannelSet {
            mode: ChannelMode::Composed,
            up,
            down,
            h,
        })
    }

    fn validate(&self, users: usize, l: usize, m: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("channel set: {what}")));
        if self.h.len() != users || self.h.iter().any(|row| row.len() != users) {
            return bad("expected a K x K grid of equivalent channels");
        }
        if self.h.iter().flatten().any(|hki| hki.shape() != (l, l)) {
            return bad("equivalent channels must be L x L");
        }
        match self.mode {
            ChannelMode::Direct => {
                if !self.up.is_empty() || !self.down.is_empty() {
                    return bad("direct mode carries no uplink/downlink factors");
                }
            }
            ChannelMode::Composed => {
                if self.up.len() != users
                    || self.down.len() != users
                    || self.up.iter().any(|u| u.shape() != (m, l))
                    || self.down.iter().any(|d| d.shape() != (l, m))
                {
                    return bad("composed mode needs K uplink (M x L) and K downlink (L x M) matrices");
                }
            }
        }
        let all = self.h.iter().flatten().chain(&self.up).chain(&self.down);
        if all.flat_map(|mat| mat.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return bad("non-finite channel coefficient");
        }
        Ok(())
    }
}

/// Draws a channel realization. A pure function of its arguments.
pub fn sample_channels(users: usize, l: usize, m: usize, mode: ChannelMode, seed: u64) -> Result<ChannelSet> {
    if users == 0 || l == 0 || m == 0 {
        return Err(Error::InvalidInput("channel dimensions must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        ChannelMode::Direct => {
            let h = (0..users)
                .map(|_| (0..users).map(|_| gaussian_matrix(l, l, &mut rng)).collect())
                .collect();
            Ok(ChannelSet {
                mode,
                up: Vec::new(),
                down: Vec::new(),
                h,
            })
        }
        ChannelMode::Composed => {
            let up: Vec<_> = (0..users).map(|_| gaussian_matrix(m, l, &mut rng)).collect();
            let down: Vec<_> = (0..users).map(|_| gaussian_matrix(l, m, &mut rng)).collect();
            ChannelSet::composed(up, down)
        }
    }
}

/// Message index sets: what every user holds locally and what it requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSets {
    pub messages: usize,
    /// `available[k]`: messages user `k` can compute from its own files.
    pub available: Vec<Vec<usize>>,
    /// `requested[k]`: messages of task `k` on files user `k` lacks.
    pub requested: Vec<Vec<usize>>,
}

impl IndexSets {
    pub fn users(&self) -> usize {
        self.available.len()
    }

    /// Users that can compute message `j`.
    pub fn holders(&self, j: usize) -> Vec<usize> {
        (0..self.users())
            .filter(|&i| self.available[i].binary_search(&j).is_ok())
            .collect()
    }

    pub fn is_available(&self, k: usize, j: usize) -> bool {
        self.available[k].binary_search(&j).is_ok()
    }
}

/// `T_k = {j N + n : n ∈ F_k}` and `R_k = {k N + n : n ∉ F_k}`.
pub fn build_index_sets(users: usize, files: usize, placement: &[Vec<usize>]) -> Result<IndexSets> {
    if placement.len() != users {
        return Err(Error::InvalidInput(format!(
            "placement lists {} users, expected {users}",
            placement.len()
        )));
    }
    let mut covered = vec![false; files];
    let mut sets = Vec::with_capacity(users);
    for (k, fk) in placement.iter().enumerate() {
        let mut set = BTreeSet::new();
        for &n in fk {
            if n >= files {
                return Err(Error::InvalidInput(format!(
                    "user {k} stores file {n}, but only {files} files exist"
                )));
            }
            covered[n] = true;
            set.insert(n);
        }
        sets.push(set);
    }
    if let Some(missing) = covered.iter().position(|c| !c) {
        return Err(Error::InvalidPlacement(format!("file {missing} is stored by no user")));
    }
    let available = sets
        .iter()
        .map(|fk| {
            (0..users)
                .flat_map(|j| fk.iter().map(move |&n| j * files + n))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    let requested = sets
        .iter()
        .enumerate()
        .map(|(k, fk)| (0..files).filter(|n| !fk.contains(n)).map(|n| k * files + n).collect())
        .collect();
    Ok(IndexSets {
        messages: users * files,
        available,
        requested,
    })
}

/// Every user stores exactly `mu` files and every file sits on exactly `mu K / N` users.
///
/// User slot `s` holds files `s mu, ..., s mu + mu - 1 (mod N)`; the seed shuffles
/// which user gets which slot and relabels the files.
pub fn uniform_placement(users: usize, files: usize, mu: usize, seed: u64) -> Result<Placement> {
    if users == 0 || files == 0 || mu == 0 || mu > files {
        return Err(Error::InvalidInput(format!(
            "uniform placement needs K, N >= 1 and 1 <= mu <= N (K={users}, N={files}, mu={mu})"
        )));
    }
    if !(mu * users).is_multiple_of(files) {
        return Err(Error::InfeasibleUniformPlacement { users, files, mu });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<usize> = (0..users).collect();
    slots.shuffle(&mut rng);
    let mut labels: Vec<usize> = (0..files).collect();
    labels.shuffle(&mut rng);
    Ok(slots
        .iter()
        .map(|&s| {
            let mut fk: Vec<usize> = (0..mu).map(|t| labels[(s * mu + t) % files]).collect();
            fk.sort_unstable();
            fk
        })
        .collect())
}

/// Covering random placement: file `n` first goes to user `n mod K`, then each user is
/// topped up to `mu` files drawn uniformly without replacement.
pub fn random_placement(users: usize, files: usize, mu: usize, seed: u64) -> Result<Placement> {
    if users == 0 || files == 0 || mu == 0 || mu > files {
        return Err(Error::InvalidInput(format!(
            "random placement needs K, N >= 1 and 1 <= mu <= N (K={users}, N={files}, mu={mu})"
        )));
    }
    if mu * users < files {
        return Err(Error::InfeasiblePlacement { users, files, mu });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placement = Vec::with_capacity(users);
    for k in 0..users {
        let mut fk: Vec<usize> = (k..files).step_by(users).collect();
        let mut rest: Vec<usize> = (0..files).filter(|n| n % users != k).collect();
        rest.shuffle(&mut rng);
        fk.extend(rest.into_iter().take(mu - fk.len()));
        fk.sort_unstable();
        placement.push(fk);
    }
    Ok(placement)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub users: usize,
    pub files: usize,
    pub mu: usize,
    /// Antennas per mobile user.
    pub l: usize,
    /// Antennas at the access point.
    pub m: usize,
    /// Datastreams per message.
    pub d: usize,
    pub placement: Placement,
    pub channels: ChannelSet,
    /// Seed the channels were drawn with; carried through serialization for replay.
    pub seed: u64,
}

impl ProblemInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        users: usize,
        files: usize,
        mu: usize,
        l: usize,
        m: usize,
        d: usize,
        placement: Placement,
        channels: ChannelSet,
        seed: u64,
    ) -> Result<Self> {
        let inst = ProblemInstance {
            users,
            files,
            mu,
            l,
            m,
            d,
            placement,
            channels,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Draws channels for `placement` from `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn generate(
        users: usize,
        files: usize,
        mu: usize,
        l: usize,
        m: usize,
        d: usize,
        placement: Placement,
        mode: ChannelMode,
        seed: u64,
    ) -> Result<Self> {
        let channels = sample_channels(users, l, m, mode, seed)?;
        Self::new(users, files, mu, l, m, d, placement, channels, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users < 2 || self.files < 1 || self.l < 1 || self.m < 1 || self.d < 1 {
            return Err(Error::InvalidInput(format!(
                "need K >= 2 and N, L, M, d >= 1 (K={}, N={}, L={}, M={}, d={})",
                self.users, self.files, self.l, self.m, self.d
            )));
        }
        if self.mu * self.users < self.files {
            return Err(Error::InfeasiblePlacement {
                users: self.users,
                files: self.files,
                mu: self.mu,
            });
        }
        if let Some(k) = self.placement.iter().position(|fk| fk.len() > self.mu) {
            return Err(Error::InvalidPlacement(format!(
                "user {k} stores {} files, capacity is {}",
                self.placement[k].len(),
                self.mu
            )));
        }
        build_index_sets(self.users, self.files, &self.placement)?;
        self.channels.validate(self.users, self.l, self.m)
    }

    pub fn index_sets(&self) -> IndexSets {
        build_index_sets(self.users, self.files, &self.placement)
            .expect("placement validated at construction")
    }

    /// Line-oriented text form; every float is written with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            self.users, self.files, self.mu, self.l, self.m, self.d, self.channels.mode, self.seed
        );
        for fk in &self.placement {
            let line: Vec<String> = fk.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let mats: Vec<&ComplexMatrix> = match self.channels.mode {
            ChannelMode::Direct => self.channels.h.iter().flatten().collect(),
            ChannelMode::Composed => self.channels.up.iter().chain(&self.channels.down).collect(),
        };
        for mat in mats {
            out.push('\n');
            write_matrix(&mut out, mat);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let header_err = |msg: &str| Error::Parse {
            line: 1,
            message: msg.to_string(),
        };
        let header: Vec<&str> = lines
            .first()
            .ok_or_else(|| header_err("empty input"))?
            .split_whitespace()
            .collect();
        if header.len() != 8 {
            return Err(header_err("expected `K N mu L M d mode seed`"));
        }
        let num = |i: usize| -> Result<usize> {
            header[i]
                .parse()
                .map_err(|_| header_err(&format!("field {} is not a count: `{}`", i + 1, header[i])))
        };
        let (users, files, mu, l, m, d) = (num(0)?, num(1)?, num(2)?, num(3)?, num(4)?, num(5)?);
        let mode: ChannelMode = header[6].parse().map_err(|e: Error| header_err(&e.to_string()))?;
        let seed: u64 = header[7]
            .parse()
            .map_err(|_| header_err(&format!("seed is not an integer: `{}`", header[7])))?;
        if users < 1 || lines.len() < 1 + users {
            return Err(header_err("placement lines missing"));
        }

        let mut placement = Vec::with_capacity(users);
        for (k, line) in lines[1..=users].iter().enumerate() {
            let lineno = k + 2;
            let mut fk = Vec::new();
            for tok in line.split_whitespace() {
                let n: usize = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad file index `{tok}`"),
                })?;
                if n == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "file indices are 1-based".into(),
                    });
                }
                fk.push(n - 1);
            }
            fk.sort_unstable();
            placement.push(fk);
        }

        let mut cursor = MatrixReader {
            lines: &lines,
            pos: 1 + users,
        };
        let channels = match mode {
            ChannelMode::Direct => {
                let mut h = Vec::with_capacity(users);
                for _ in 0..users {
                    let mut row = Vec::with_capacity(users);
                    for _ in 0..users {
                        row.push(cursor.read(l, l)?);
                    }
                    h.push(row);
                }
                ChannelSet {
                    mode,
                    up: Vec::new(),
                    down: Vec::new(),
                    h,
                }
            }
            ChannelMode::Composed => {
                let up = (0..users).map(|_| cursor.read(m, l)).collect::<Result<Vec<_>>>()?;
                let down = (0..users).map(|_| cursor.read(l, m)).collect::<Result<Vec<_>>>()?;
                ChannelSet::composed(up, down)?
            }
        };
        if let Some((off, _)) = lines[cursor.pos..].iter().enumerate().find(|(_, s)| !s.trim().is_empty()) {
            return Err(Error::Parse {
                line: cursor.pos + off + 1,
                message: "trailing content after last channel matrix".into(),
            });
        }
        Self::new(users, files, mu, l, m, d, placement, channels, seed)
    }
}

pub(crate) fn write_matrix(out: &mut String, mat: &ComplexMatrix) {
    for r in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols())
            .map(|c| {
                let z = mat[(r, c)];
                format!("{:.16e} {:.16e}", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

struct MatrixReader<'a> {
    lines: &'a [&'a str],
    pos: usize,
}

impl MatrixReader<'_> {
    /// Skips blank separator lines, then reads `rows` lines of `cols` `re im` pairs.
    fn read(&mut self, rows: usize, cols: usize) -> Result<ComplexMatrix> {
        while self.pos < self.lines.len() && self.lines[self.pos].trim().is_empty() {
            self.pos += 1;
        }
        let mut mat = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            let lineno = self.pos + 1;
            let line = self.lines.get(self.pos).ok_or(Error::Parse {
                line: lineno,
                message: "unexpected end of input inside a channel matrix".into(),
            })?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("bad number `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != 2 * cols {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} numbers, found {}", 2 * cols, vals.len()),
                });
            }
            for c in 0..cols {
                mat[(r, c)] = C64::new(vals[2 * c], vals[2 * c + 1]);
            }
            self.pos += 1;
        }
        Ok(mat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
        sets.iter().map(|s| s.iter().map(|x| x + 1).collect()).collect()
    }

    #[test]
    fn two_user_index_sets() {
        let idx = build_index_sets(2, 2, &[vec![0], vec![1]]).unwrap();
        assert_eq!(one_based(&idx.available), vec![vec![1, 3], vec![2, 4]]);
        assert_eq!(one_based(&idx.requested), vec![vec![2], vec![3]]);
    }

    #[test]
    fn single_user_requests_nothing() {
        let idx = build_index_sets(1, 1, &[vec![0]]).unwrap();
        assert_eq!(one_based(&idx.available), vec![vec![1]]);
        assert!(idx.requested[0].is_empty());
    }

    #[test]
    fn index_set_errors() {
        assert!(matches!(
            build_index_sets(2, 3, &[vec![0], vec![1]]),
            Err(Error::InvalidPlacement(_))
        ));
        assert!(matches!(
            build_index_sets(2, 2, &[vec![0], vec![2]]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(build_index_sets(3, 2, &[vec![0], vec![1]]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn uniform_placement_cases() {
        for seed in 0..20 {
            let p = uniform_placement(5, 5, 2, seed).unwrap();
            let mut count = [0usize; 5];
            for fk in &p {
                assert_eq!(fk.len(), 2);
                for &n in fk {
                    count[n] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == 2));
        }
        let p = uniform_placement(2, 2, 1, 0).unwrap();
        let mut all: Vec<usize> = p.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1]);
        assert!(matches!(
            uniform_placement(4, 8, 3, 0),
            Err(Error::InfeasibleUniformPlacement { .. })
        ));
    }

    #[test]
    fn random_placement_cases() {
        let p = random_placement(5, 10, 5, 7).unwrap();
        assert!(p.iter().all(|fk| fk.len() == 5));
        assert!(build_index_sets(5, 10, &p).is_ok());
        for seed in 0..5 {
            assert_eq!(random_placement(2, 2, 2, seed).unwrap(), vec![vec![0, 1], vec![0, 1]]);
        }
        assert!(matches!(random_placement(2, 5, 2, 0), Err(Error::InfeasiblePlacement { .. })));
    }

    #[test]
    fn channel_sampling_is_deterministic() {
        let a = sample_channels(3, 2, 2, ChannelMode::Direct, 11).unwrap();
        let b = sample_channels(3, 2, 2, ChannelMode::Direct, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(3, 2, 2, ChannelMode::Direct, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unit_variance_entries() {
        let ch = sample_channels(100, 10, 1, ChannelMode::Direct, 2024).unwrap();
        let draws: Vec<f64> = ch.h.iter().flatten().flat_map(|m| m.iter().map(|z| z.norm_sqr())).collect();
        assert_eq!(draws.len(), 1_000_000);
        let scalar: Vec<f64> = draws.iter().step_by(100).copied().collect();
        assert_eq!(scalar.len(), 10_000);
        let mean = scalar.iter().sum::<f64>() / scalar.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |h|^2 = {mean}");
    }

    #[test]
    fn composed_channels_are_products() {
        let ch = sample_channels(2, 1, 1, ChannelMode::Composed, 3).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                assert_eq!(ch.h[k][i][(0, 0)], ch.down[k][(0, 0)] * ch.up[i][(0, 0)]);
            }
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        for mode in [ChannelMode::Direct, ChannelMode::Composed] {
            let placement = random_placement(3, 4, 2, 1).unwrap();
            let inst = ProblemInstance::generate(3, 4, 2, 2, 3, 1, placement, mode, 99).unwrap();
            let text = inst.to_text();
            let back = ProblemInstance::from_text(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let placement = vec![vec![0], vec![1]];
        let inst = ProblemInstance::generate(2, 2, 1, 1, 1, 1, placement, ChannelMode::Direct, 0).unwrap();
        let text = inst.to_text().replacen("\n2\n", "\nx\n", 1);
        match ProblemInstance::from_text(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match ProblemInstance::from_text("2 2 1 1 1 1 direct") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn instance_invariants_are_enforced() {
        let ch = sample_channels(2, 1, 1, ChannelMode::Direct, 0).unwrap();
        assert!(ProblemInstance::new(2, 2, 1, 1, 1, 1, vec![vec![0, 1], vec![1]], ch.clone(), 0).is_err());
        assert!(ProblemInstance::new(2, 3, 1, 1, 1, 1, vec![vec![0], vec![1]], ch, 0).is_err());
    }
}
