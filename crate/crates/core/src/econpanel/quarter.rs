use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar quarter. Orders chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    pub q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Option<Self> {
        (1..=4).contains(&q).then_some(Self { year, q })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            q: (date.month0() / 3 + 1) as u8,
        }
    }

    /// Quarters since year 0, handy for consecutiveness checks.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.q as i64 - 1)
    }

    fn from_ordinal(n: i64) -> Self {
        Self {
            year: n.div_euclid(4) as i32,
            q: (n.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn prev(self) -> Self {
        Self::from_ordinal(self.ordinal() - 1)
    }

    pub fn next(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, (self.q as u32 - 1) * 3 + 1, 1).expect("valid quarter start")
    }

    pub fn last_day(self) -> NaiveDate {
        self.next().first_day().pred_opt().expect("valid quarter end")
    }

    /// Inclusive range of quarters.
    pub fn range(from: Self, to: Self) -> impl Iterator<Item = Quarter> {
        (from.ordinal()..=to.ordinal()).map(Self::from_ordinal)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = String;

    /// Accepts `2020Q1`, `2020-Q1` and `2020q1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (y, q) = t
            .split_once(['Q', 'q'])
            .ok_or_else(|| format!("bad quarter {s:?}"))?;
        let year = y
            .trim_end_matches('-')
            .parse::<i32>()
            .map_err(|_| format!("bad quarter {s:?}"))?;
        let q = q.parse::<u8>().map_err(|_| format!("bad quarter {s:?}"))?;
        Quarter::new(year, q).ok_or_else(|| format!("bad quarter {s:?}"))
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_step() {
        let q: Quarter = "2020Q1".parse().unwrap();
        assert_eq!(q.prev().to_string(), "2019Q4");
        assert_eq!(q.next(), "2020-q2".parse().unwrap());
        assert!("2020Q5".parse::<Quarter>().is_err());
        assert!("2020".parse::<Quarter>().is_err());
        assert_eq!(q.last_day(), NaiveDate::from_ymd_opt(2020, 3, 31).unwrap());
        assert_eq!(Quarter::of(NaiveDate::from_ymd_opt(2021, 12, 31).unwrap()).to_string(), "2021Q4");
        let all: Vec<_> = Quarter::range(q, "2022Q4".parse().unwrap()).collect();
        assert_eq!(all.len(), 12);
    }
}
