//! Tag umbrellas, regional and industry aggregates of firm indicators, and
//! the country coverage rules that decide which firms enter the sample.

mod industry;
mod region;
mod sample;
mod tags;
mod umbrella;

pub use industry::{
    industry_group, industry_shares, period_max_scores, IndustryReport, IndustryShare,
    ENERGY_ENVIRONMENT, OTHER_SERVICES,
};
pub use region::{region_series, RegionLevel, RegionPoint, RegionSeries};
pub use sample::{
    builtin_coverage, country_exclusion, filter_sample, load_coverage, parse_coverage,
    CoverageRow, ExclusionReport, FilterMode, SampleThresholds,
};
pub use tags::{tag_country_shares, TagDenominator, TagShare};
pub use umbrella::{map_tags_to_umbrellas, UmbrellaTable, UMBRELLA_NAMES};

#[derive(Debug, thiserror::Error)]
pub enum IndicatorError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("umbrella table: {0}")]
    Umbrella(String),
    #[error("indicator refers to unknown firm {0:?}")]
    UnknownFirm(String),
    #[error("indicator refers to unknown snapshot {0:?}")]
    UnknownSnapshot(String),
    #[error("{0}")]
    Config(String),
}
