//! Radio maps, preprocessing scalers, splitting and CSV persistence.

mod radio_map;
mod scaler;

pub use radio_map::{load_radio_map, split, RadioMap, TestSet, DEFAULT_SENTINEL};
pub use scaler::{MinMaxScaler, StdScaler};
