//! MovieLens `u.data` ingestion and a seeded synthetic stand-in.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use orthohmc::targets::{LowRankModel, Rating};
use orthohmc::StiefelPoint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::CliError;

/// Ratings with ids remapped to dense 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    /// `(user index, item index, rating in 1..=5)`.
    pub triples: Vec<(usize, usize, u8)>,
    /// Original id of each user index, ascending.
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

/// Parses one `user<TAB>item<TAB>rating<TAB>timestamp` line.
pub fn parse_line(line: &str) -> Result<(u64, u64, u8), String> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!(
            "expected 4 tab-separated fields, found {}",
            fields.len()
        ));
    }
    let id = |s: &str, what: &str| {
        s.parse::<u64>()
            .map_err(|_| format!("{what} id {s:?} is not a nonnegative integer"))
    };
    let user = id(fields[0], "user")?;
    let item = id(fields[1], "item")?;
    let rating: u8 = fields[2]
        .parse()
        .map_err(|_| format!("rating {:?} is not an integer", fields[2]))?;
    if !(1..=5).contains(&rating) {
        return Err(format!("rating {rating} outside 1..=5"));
    }
    fields[3]
        .parse::<i64>()
        .map_err(|_| format!("timestamp {:?} is not an integer", fields[3]))?;
    Ok((user, item, rating))
}

/// Parses the whole text; `path` is only used in error messages.
pub fn parse_movielens(text: &str, path: &Path) -> Result<RatingsDataset, CliError> {
    let mut raw = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_line(line).map_err(|message| CliError::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        })?;
        raw.push(t);
    }
    if raw.is_empty() {
        return Err(CliError::Contract(format!(
            "{} contains no ratings",
            path.display()
        )));
    }
    Ok(RatingsDataset::from_raw(&raw))
}

pub fn load_movielens(path: &Path) -> Result<RatingsDataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_movielens(&text, path)
}

fn dense_index(ids: impl Iterator<Item = u64>) -> BTreeMap<u64, usize> {
    let mut map: BTreeMap<u64, usize> = ids.map(|i| (i, 0)).collect();
    for (k, v) in map.values_mut().enumerate() {
        *v = k;
    }
    map
}

impl RatingsDataset {
    /// Builds a dataset from raw `(user id, item id, rating)` triples.
    pub fn from_raw(raw: &[(u64, u64, u8)]) -> Self {
        let users = dense_index(raw.iter().map(|t| t.0));
        let items = dense_index(raw.iter().map(|t| t.1));
        Self {
            triples: raw
                .iter()
                .map(|&(u, i, r)| (users[&u], items[&i], r))
                .collect(),
            user_ids: users.into_keys().collect(),
            item_ids: items.into_keys().collect(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Observations with ratings shifted to `r − 3`.
    pub fn centered(&self) -> Vec<Rating> {
        self.triples
            .iter()
            .map(|&(row, col, r)| Rating {
                row,
                col,
                value: f64::from(r) - 3.0,
            })
            .collect()
    }

    /// Seeded shuffle, then `(train, test)` with `round(test_fraction·len)`
    /// test ratings.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Vec<Rating>, Vec<Rating>) {
        let mut all = self.centered();
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((all.len() as f64) * test_fraction).round() as usize;
        let test = all.split_off(all.len() - n_test.min(all.len()));
        (all, test)
    }

    /// Ratings drawn from a random rank-`rank` matrix plus noise.
    ///
    /// Singular values are `0.6·sqrt(users·items/rank)·(1 − 0.05k)`, so the
    /// entries have standard deviation near 0.6. Each observed cell is
    /// `clamp(round(3 + w + 0.9·z), 1, 5)` with `z` standard normal, and no
    /// cell is observed twice.
    pub fn synthetic(
        users: usize,
        items: usize,
        ratings: usize,
        rank: usize,
        seed: u64,
    ) -> Result<Self, CliError> {
        Ok(Self::synthetic_with_truth(users, items, ratings, rank, seed)?.0)
    }

    /// As [`Self::synthetic`], also returning the generating model. Its
    /// indices are `id − 1`, which equal the dense indices whenever every
    /// user and item received a rating.
    pub fn synthetic_with_truth(
        users: usize,
        items: usize,
        ratings: usize,
        rank: usize,
        seed: u64,
    ) -> Result<(Self, LowRankModel), CliError> {
        if rank == 0 || rank > users.min(items) {
            return Err(CliError::Config(format!(
                "synthetic rank {rank} must lie in 1..={}",
                users.min(items)
            )));
        }
        if ratings == 0 || ratings > users * items / 2 {
            return Err(CliError::Config(format!(
                "synthetic rating count {ratings} must lie in 1..={}",
                users * items / 2
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = StiefelPoint::random(&mut rng, users, rank)?;
        let v = StiefelPoint::random(&mut rng, items, rank)?;
        let scale = synthetic_scale(users, items, rank);
        let log_sigma = (0..rank)
            .map(|k| (scale * (1.0 - 0.05 * k as f64)).ln())
            .collect();
        let truth = LowRankModel::new(u, v, log_sigma)?;
        let mut seen = HashSet::with_capacity(ratings);
        let mut raw = Vec::with_capacity(ratings);
        while raw.len() < ratings {
            let (r, c) = (rng.random_range(0..users), rng.random_range(0..items));
            if !seen.insert((r, c)) {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            let value = (3.0 + truth.predict(r, c) + 0.9 * z)
                .round()
                .clamp(1.0, 5.0);
            raw.push((r as u64 + 1, c as u64 + 1, value as u8));
        }
        Ok((Self::from_raw(&raw), truth))
    }
}

/// Singular-value scale giving entries of standard deviation about 0.6.
pub fn synthetic_scale(users: usize, items: usize, rank: usize) -> f64 {
    0.6 * ((users * items) as f64 / rank as f64).sqrt()
}
