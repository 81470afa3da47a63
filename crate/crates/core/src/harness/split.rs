use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::QARecord;
use crate::error::{Error, Result};

/// Train and evaluation record sets, optionally filtered by genre.
///
/// `X→Y` means train on genre X and evaluate on genre Y.
#[derive(Clone, Debug)]
pub struct GenreSplit {
    pub train_genre: Option<String>,
    pub eval_genre: Option<String>,
    pub train: Vec<QARecord>,
    pub eval: Vec<QARecord>,
}

fn filter(pool: &[QARecord], genre: Option<&str>) -> Vec<QARecord> {
    pool.iter()
        .filter(|r| genre.is_none_or(|g| r.genre == g))
        .cloned()
        .collect()
}

impl GenreSplit {
    /// Filters each pool by its genre (`None` keeps everything). Fails when
    /// the two sides share a record id.
    pub fn new(
        train_pool: &[QARecord],
        eval_pool: &[QARecord],
        train_genre: Option<&str>,
        eval_genre: Option<&str>,
    ) -> Result<Self> {
        let split = Self {
            train_genre: train_genre.map(str::to_string),
            eval_genre: eval_genre.map(str::to_string),
            train: filter(train_pool, train_genre),
            eval: filter(eval_pool, eval_genre),
        };
        let train_ids: HashSet<&str> = split.train.iter().map(|r| r.id.as_str()).collect();
        if let Some(r) = split.eval.iter().find(|r| train_ids.contains(r.id.as_str())) {
            return Err(Error::Data(format!("record {} is in both the train and eval sets", r.id)));
        }
        Ok(split)
    }

    /// `X→Y` over a single pool. `X` and `Y` must differ.
    pub fn by_genre(pool: &[QARecord], train_genre: &str, eval_genre: &str) -> Result<Self> {
        if train_genre == eval_genre {
            return Err(Error::Config(format!(
                "train and eval genre are both {train_genre:?}; use separate pools for in-genre runs"
            )));
        }
        Self::new(pool, pool, Some(train_genre), Some(eval_genre))
    }

    /// Separate train and eval sets with no genre filter.
    pub fn holdout(train: Vec<QARecord>, eval: Vec<QARecord>) -> Result<Self> {
        Self::new(&train, &eval, None, None)
    }

    /// Checks a training audit log: no evaluation record (or, for genre
    /// splits, no record of another genre) was visited.
    pub fn audit(&self, visited: &BTreeSet<String>) -> Result<()> {
        if let Some(r) = self.eval.iter().find(|r| visited.contains(&r.id)) {
            return Err(Error::Invariant(format!("evaluation record {} was visited by training", r.id)));
        }
        let allowed: HashSet<&str> = self.train.iter().map(|r| r.id.as_str()).collect();
        if let Some(id) = visited.iter().find(|id| !allowed.contains(id.as_str())) {
            return Err(Error::Invariant(format!("training visited {id}, which is not in the train split")));
        }
        Ok(())
    }
}

impl fmt::Display for GenreSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |g: &Option<String>| g.clone().unwrap_or_else(|| "all".into());
        write!(f, "{}→{}", side(&self.train_genre), side(&self.eval_genre))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Embedding;

    fn rec(id: &str, genre: &str) -> QARecord {
        let f = Embedding::from(vec![0.0; crate::FEATURE_DIM]);
        QARecord {
            id: id.into(),
            d: vec![f.clone(); 5],
            t: vec![f; 5],
            subtitle: String::new(),
            gold: 0,
            genre: genre.into(),
            series: String::new(),
        }
    }

    #[test]
    fn genre_partition() {
        let pool = vec![rec("a", "x"), rec("b", "y"), rec("c", "x"), rec("d", "z")];
        let s = GenreSplit::by_genre(&pool, "x", "y").unwrap();
        assert_eq!(s.train.len(), 2);
        assert_eq!(s.eval.len(), 1);
        assert_eq!(s.to_string(), "x→y");
        assert!(GenreSplit::by_genre(&pool, "x", "x").is_err());
    }

    #[test]
    fn shared_ids_rejected() {
        assert!(GenreSplit::holdout(vec![rec("a", "x")], vec![rec("a", "y")]).is_err());
    }

    #[test]
    fn audit_catches_leaks() {
        let pool = vec![rec("a", "x"), rec("b", "y")];
        let s = GenreSplit::by_genre(&pool, "x", "y").unwrap();
        assert!(s.audit(&["a".to_string()].into()).is_ok());
        assert!(s.audit(&["a".to_string(), "b".to_string()].into()).is_err());
    }
}
