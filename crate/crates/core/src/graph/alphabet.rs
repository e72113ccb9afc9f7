use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite ordered alphabet Ω, indexed `0..q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(Error::param("alphabet", "needs at least two symbols"));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::param("alphabet", format!("duplicate symbol `{s}`")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// `{0, 1, …, q-1}`.
    pub fn with_size(q: usize) -> Result<Self> {
        Self::new((0..q).map(|i| i.to_string()))
    }

    /// The spin alphabet `{+1, -1}`; index 0 is `+1`.
    pub fn spins() -> Self {
        Alphabet {
            symbols: vec!["+1".into(), "-1".into()],
        }
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// Spin value of symbol index `i` in [`Alphabet::spins`].
#[inline]
pub(crate) fn spin(i: usize) -> f64 {
    1.0 - 2.0 * i as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_duplicate_alphabets() {
        assert!(Alphabet::new(["a"]).is_err());
        assert!(Alphabet::new(["a", "a"]).is_err());
        let a = Alphabet::new(["x", "y", "z"]).unwrap();
        assert_eq!(a.size(), 3);
        assert_eq!(a.index_of("z"), Some(2));
        assert_eq!(Alphabet::spins().symbol(0), "+1");
    }
}
