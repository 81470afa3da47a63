//! Seeded synthetic worlds and datasets.
//!
//! A [`SyntheticWorld`] is a lexicon of pseudo-words: an action dictionary, an
//! object dictionary and a Gaussian embedding table over both. Datasets drawn
//! from it come in three flavours:
//!
//! - `pathway`: each candidate's features are a noisy mixture of the
//!   embeddings of a few "planted" verbs and nouns. Only the gold candidate's
//!   words reach the subtitle: by default the subtitle lists the action and
//!   object labels nearest to the gold `T` (the planted words first, then
//!   their closest neighbours) in order of similarity.
//! - `text`: the gold candidate's `T` carries a fixed hidden direction.
//! - `none`: every feature is independent noise.
//!
//! Each genre samples its words from its own disjoint slice of each dictionary.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::QARecord;
use crate::error::{Error, Result};
use crate::extractor::{extract_subtitle_words, top_k_labels, FeatureSource};
use crate::lexicon::{Embedding, EmbeddingTable, LabelDictionary, LabelKind, Lexicon};
use crate::numerics::kernels::{axpy, norm};
use crate::{FEATURE_DIM, NUM_CANDIDATES};

/// Default genre tags and the series each one is labelled with.
pub const GENRES: [(&str, &str); 3] = [("medical", "house"), ("sitcom", "bbt"), ("crime", "castle")];

const FILLER: [&str; 32] = [
    "the", "a", "to", "and", "you", "i", "we", "it", "is", "that", "what", "this", "no", "oh", "well", "just", "my",
    "your", "me", "he", "she", "they", "in", "on", "of", "for", "with", "so", "not", "now", "here", "there",
];
const SPEAKERS: [&str; 6] = ["Alex", "Sam", "Jordan", "Casey", "Robin", "Taylor"];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Pathway,
    Text,
    None,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Pathway => "pathway",
            Signal::Text => "text",
            Signal::None => "none",
        })
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pathway" => Ok(Signal::Pathway),
            "text" => Ok(Signal::Text),
            "none" => Ok(Signal::None),
            other => Err(Error::Config(format!("unknown signal {other:?} (pathway|text|none)"))),
        }
    }
}

/// Size and seed of a synthetic lexicon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub n_actions: usize,
    pub n_objects: usize,
    pub dim: usize,
    /// Standard deviation of each embedding coordinate.
    pub scale: f64,
    pub seed: u64,
}

impl Default for WorldSpec {
    /// Reference dictionary sizes: 1000 actions, 1374 objects.
    fn default() -> Self {
        Self {
            n_actions: 1000,
            n_objects: 1374,
            dim: FEATURE_DIM,
            scale: 3.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub spec: WorldSpec,
    pub lexicon: Lexicon,
    /// Seeded orderings of the two dictionaries; genre slices are cut from these.
    action_order: Vec<usize>,
    object_order: Vec<usize>,
    hidden_direction: Vec<f64>,
}

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if rng.random_bool(0.3) {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        }
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl SyntheticWorld {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        if !(spec.scale.is_finite() && spec.scale > 0.0) {
            return Err(Error::Config("embedding scale must be positive".into()));
        }
        if spec.n_actions == 0 || spec.n_objects == 0 {
            return Err(Error::Config("synthetic dictionaries must be non-empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut taken: HashSet<String> = FILLER.iter().map(|s| s.to_string()).collect();
        taken.extend(SPEAKERS.iter().map(|s| s.to_lowercase()));
        let actions = pseudo_words(&mut rng, spec.n_actions, &mut taken);
        let objects = pseudo_words(&mut rng, spec.n_objects, &mut taken);
        // rows are standard normal, not unit norm, so projections are not dominated by biases
        let rows = actions
            .iter()
            .chain(&objects)
            .map(|w| {
                let mut v = gaussian(&mut rng, spec.dim);
                v.iter_mut().for_each(|x| *x *= spec.scale);
                (w.clone(), v)
            })
            .collect();
        let table = EmbeddingTable::new(spec.dim, rows)?;
        let mut action_order: Vec<usize> = (0..spec.n_actions).collect();
        let mut object_order: Vec<usize> = (0..spec.n_objects).collect();
        action_order.shuffle(&mut rng);
        object_order.shuffle(&mut rng);
        let hidden_direction = normalized(gaussian(&mut rng, spec.dim));
        let lexicon = Lexicon {
            actions: LabelDictionary::from_labels(LabelKind::Action, &actions, &table)?,
            objects: LabelDictionary::from_labels(LabelKind::Object, &objects, &table)?,
            table,
        };
        Ok(Self {
            spec,
            lexicon,
            action_order,
            object_order,
            hidden_direction,
        })
    }

    /// Reference-size world (1000 actions, 1374 objects, 768-d).
    pub fn reference() -> Result<Self> {
        Self::new(WorldSpec::default())
    }

    /// Dictionary indices reserved for genre `g` of `n_genres`.
    pub fn genre_slice(&self, kind: LabelKind, g: usize, n_genres: usize) -> Vec<usize> {
        let order = match kind {
            LabelKind::Action => &self.action_order,
            LabelKind::Object => &self.object_order,
        };
        order.iter().skip(g).step_by(n_genres).copied().collect()
    }
}

/// What to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    pub genres: Vec<String>,
    pub seed: u64,
    pub signal: Signal,
}

impl SyntheticSpec {
    pub fn new(n_records: usize, seed: u64, signal: Signal) -> Self {
        Self {
            n_records,
            genres: GENRES.iter().map(|(g, _)| g.to_string()).collect(),
            seed,
            signal,
        }
    }

    pub fn with_genres<S: AsRef<str>>(mut self, genres: &[S]) -> Self {
        self.genres = genres.iter().map(|g| g.as_ref().to_string()).collect();
        self
    }
}

/// Generator knobs. The defaults are what the shipped datasets use.
#[derive(Clone, Debug, PartialEq)]
pub struct Knobs {
    /// Planted verbs (and, separately, nouns) per candidate.
    pub planted: (usize, usize),
    /// Range the mixture weights are drawn from.
    pub weight: (f64, f64),
    /// Noise norm relative to the unit mixture, for `T` and `D`.
    pub text_noise: f64,
    pub audio_noise: f64,
    /// Strength of the hidden direction added to the gold `T` under `text`.
    pub text_margin: f64,
    /// Filler tokens inserted before each planted word.
    pub filler: (usize, usize),
    /// Extra dictionary words in the subtitle that no candidate plants.
    pub stray: (usize, usize),
    /// When set, the gold subtitle lists the top-`n` action and object labels
    /// retrieved from the gold `T` (in retrieval order) instead of the planted words.
    pub echo_top: Option<usize>,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            planted: (4, 7),
            weight: (0.5, 1.0),
            text_noise: 0.5,
            audio_noise: 1.0,
            text_margin: 0.5,
            filler: (0, 3),
            stray: (0, 0),
            echo_top: Some(15),
        }
    }
}

fn series_for(genre: &str) -> String {
    GENRES
        .iter()
        .find(|(g, _)| *g == genre)
        .map(|(_, s)| s.to_string())
        .unwrap_or_else(|| format!("{genre}-series"))
}

/// Draws `n` distinct members of `pool`, avoiding `used`, and marks them used.
fn draw(rng: &mut ChaCha8Rng, pool: &[usize], n: usize, used: &mut HashSet<usize>) -> Result<Vec<usize>> {
    let free: Vec<usize> = pool.iter().copied().filter(|i| !used.contains(i)).collect();
    if free.len() < n {
        return Err(Error::Config(format!(
            "genre slice has {} unused labels, {n} needed; use a larger world or fewer genres",
            free.len()
        )));
    }
    let picked: Vec<usize> = index::sample(rng, free.len(), n).into_iter().map(|i| free[i]).collect();
    used.extend(&picked);
    Ok(picked)
}

/// Descending weights in `range`.
fn weights(rng: &mut ChaCha8Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(range.0..=range.1)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// `normalize(mixture) + noise · normalize(gaussian)`, renormalized.
fn mixture(rng: &mut ChaCha8Rng, parts: &[(&[f64], f64)], noise: f64, dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for (v, w) in parts {
        axpy(*w, v, &mut m);
    }
    let mut m = normalized(m);
    let n = normalized(gaussian(rng, dim));
    axpy(noise, &n, &mut m);
    normalized(m)
}

fn noise_feature(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    normalized(gaussian(rng, dim)).into()
}

fn styled(rng: &mut ChaCha8Rng, word: &str) -> String {
    match rng.random_range(0..6) {
        0 => word.to_uppercase(),
        1 => {
            let mut c = word.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
        _ => word.to_string(),
    }
}

struct SubtitleWriter<'a> {
    rng: &'a mut ChaCha8Rng,
    knobs: &'a Knobs,
    words: Vec<String>,
}

impl SubtitleWriter<'_> {
    fn filler(&mut self) {
        let n = self.rng.random_range(self.knobs.filler.0..=self.knobs.filler.1);
        for _ in 0..n {
            let w = FILLER[self.rng.random_range(0..FILLER.len())];
            self.words.push(w.to_string());
        }
    }

    fn word(&mut self, w: &str) {
        self.filler();
        let w = styled(self.rng, w);
        self.words.push(w);
    }

    fn finish(self) -> String {
        let speaker = SPEAKERS[self.rng.random_range(0..SPEAKERS.len())];
        let mut text = format!("{speaker}:");
        for (i, w) in self.words.iter().enumerate() {
            text.push(' ');
            text.push_str(w);
            if i + 1 < self.words.len() && self.rng.random_bool(0.15) {
                text.push_str([",", ".", "!", "?", " -"][self.rng.random_range(0..5)]);
            }
        }
        text.push_str([".", "!", "?", "..."][self.rng.random_range(0..4)]);
        text
    }
}

/// Generates `spec.n_records` records from `world` with the default knobs.
pub fn generate_synthetic(spec: &SyntheticSpec, world: &SyntheticWorld) -> Result<Vec<QARecord>> {
    generate_with(spec, world, &Knobs::default())
}

pub fn generate_with(spec: &SyntheticSpec, world: &SyntheticWorld, knobs: &Knobs) -> Result<Vec<QARecord>> {
    if spec.genres.is_empty() {
        return Err(Error::Config("at least one genre is required".into()));
    }
    if knobs.planted.0 == 0 || knobs.planted.0 > knobs.planted.1 {
        return Err(Error::Config("planted word range must be non-empty and positive".into()));
    }
    let dim = world.spec.dim;
    let n_genres = spec.genres.len();
    let lex = &world.lexicon;
    let slices: Vec<(Vec<usize>, Vec<usize>)> = (0..n_genres)
        .map(|g| {
            (
                world.genre_slice(LabelKind::Action, g, n_genres),
                world.genre_slice(LabelKind::Object, g, n_genres),
            )
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.n_records);
    for i in 0..spec.n_records {
        let g = i % n_genres;
        let genre = &spec.genres[g];
        let (verb_pool, noun_pool) = &slices[g];
        let gold = rng.random_range(0..NUM_CANDIDATES);
        let mut writer_words = Vec::new();
        let (d, t): (Vec<Embedding>, Vec<Embedding>) = match spec.signal {
            Signal::Pathway => {
                let (mut used_v, mut used_n) = (HashSet::new(), HashSet::new());
                let mut d = Vec::with_capacity(NUM_CANDIDATES);
                let mut t = Vec::with_capacity(NUM_CANDIDATES);
                for c in 0..NUM_CANDIDATES {
                    let nv = rng.random_range(knobs.planted.0..=knobs.planted.1);
                    let nn = rng.random_range(knobs.planted.0..=knobs.planted.1);
                    let verbs = draw(&mut rng, verb_pool, nv, &mut used_v)?;
                    let nouns = draw(&mut rng, noun_pool, nn, &mut used_n)?;
                    let wv = weights(&mut rng, nv, knobs.weight);
                    let wn = weights(&mut rng, nn, knobs.weight);
                    let parts: Vec<(&[f64], f64)> = verbs
                        .iter()
                        .zip(&wv)
                        .map(|(&v, &w)| (&lex.actions.embedding(v)[..], w))
                        .chain(nouns.iter().zip(&wn).map(|(&o, &w)| (&lex.objects.embedding(o)[..], w)))
                        .collect();
                    let tc: Embedding = mixture(&mut rng, &parts, knobs.text_noise, dim).into();
                    d.push(mixture(&mut rng, &parts, knobs.audio_noise, dim).into());
                    if c == gold && knobs.echo_top.is_some() {
                        let n = knobs.echo_top.unwrap_or_default();
                        let va = top_k_labels(&tc, &lex.actions, n, FeatureSource::Text)?;
                        let vo = top_k_labels(&tc, &lex.objects, n, FeatureSource::Text)?;
                        for (a, o) in va.labels(&lex.actions).iter().zip(vo.labels(&lex.objects)) {
                            writer_words.push(a.to_string());
                            writer_words.push(o.to_string());
                        }
                    } else if c == gold {
                        // verbs and nouns alternate; each list stays in weight order
                        for j in 0..nv.max(nn) {
                            if j < nv {
                                writer_words.push(lex.actions.label(verbs[j]).to_string());
                            }
                            if j < nn {
                                writer_words.push(lex.objects.label(nouns[j]).to_string());
                            }
                        }
                    }
                    t.push(tc);
                }
                let stray = rng.random_range(knobs.stray.0..=knobs.stray.1);
                for _ in 0..stray {
                    let w = if rng.random_bool(0.5) {
                        lex.actions.label(draw(&mut rng, verb_pool, 1, &mut used_v)?[0])
                    } else {
                        lex.objects.label(draw(&mut rng, noun_pool, 1, &mut used_n)?[0])
                    };
                    writer_words.push(w.to_string());
                }
                (d, t)
            }
            Signal::Text | Signal::None => {
                let d = (0..NUM_CANDIDATES).map(|_| noise_feature(&mut rng, dim)).collect();
                let t = (0..NUM_CANDIDATES)
                    .map(|c| {
                        let mut v = normalized(gaussian(&mut rng, dim));
                        if spec.signal == Signal::Text && c == gold {
                            axpy(knobs.text_margin, &world.hidden_direction, &mut v);
                        }
                        Embedding::from(v)
                    })
                    .collect();
                let mut used = HashSet::new();
                let n = rng.random_range(knobs.planted.0..=knobs.planted.1);
                for v in draw(&mut rng, verb_pool, n, &mut used)? {
                    writer_words.push(lex.actions.label(v).to_string());
                }
                let mut used = HashSet::new();
                for o in draw(&mut rng, noun_pool, n, &mut used)? {
                    writer_words.push(lex.objects.label(o).to_string());
                }
                (d, t)
            }
        };
        let mut writer = SubtitleWriter {
            rng: &mut rng,
            knobs,
            words: Vec::new(),
        };
        for w in &writer_words {
            writer.word(w);
        }
        writer.filler();
        let subtitle = writer.finish();
        records.push(QARecord {
            id: format!("{genre}-{}-{i:05}", spec.seed),
            d,
            t,
            subtitle,
            gold,
            genre: genre.clone(),
            series: series_for(genre),
        });
    }
    Ok(records)
}

/// Construction-aware baseline: scores each candidate by how many of its
/// top-`k` retrieved labels (both modalities, both dictionaries) occur in the
/// subtitle, and picks the best (lowest index on ties).
pub fn oracle_predict(record: &QARecord, lexicon: &Lexicon, k: usize) -> Result<usize> {
    let words = extract_subtitle_words(&record.subtitle, lexicon);
    let verbs: HashSet<&str> = words.verbs.iter().map(String::as_str).collect();
    let nouns: HashSet<&str> = words.nouns.iter().map(String::as_str).collect();
    let mut best = (0, usize::MAX);
    for c in 0..NUM_CANDIDATES {
        let mut hits = 0;
        for (feat, source) in [(&record.d[c], FeatureSource::Audio), (&record.t[c], FeatureSource::Text)] {
            for (dict, found) in [(&lexicon.actions, &verbs), (&lexicon.objects, &nouns)] {
                let set = top_k_labels(feat, dict, k, source)?;
                hits += set.labels(dict).iter().filter(|l| found.contains(*l)).count();
            }
        }
        if best.1 == usize::MAX || hits > best.1 {
            best = (c, hits);
        }
    }
    Ok(best.0)
}
