use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A transmission scheme compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Neural codec trained on the agent's action error.
    #[serde(rename = "tscc")]
    Tscc,
    /// Same codec trained on pixel reconstruction.
    #[serde(rename = "jscc-rec")]
    JsccRec,
    /// DCT source coding, LDPC and QAM.
    #[serde(rename = "digital")]
    Digital,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tscc, Method::JsccRec, Method::Digital];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tscc => "tscc",
            Method::JsccRec => "jscc-rec",
            Method::Digital => "digital",
        }
    }

    /// Neural methods need a trained checkpoint.
    pub fn is_neural(&self) -> bool {
        !matches!(self, Method::Digital)
    }

    /// Stable number mixed into every RNG stream key of this method.
    pub fn tag(&self) -> u64 {
        match self {
            Method::Tscc => 1,
            Method::JsccRec => 2,
            Method::Digital => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected tscc, jscc-rec or digital)"))
    }
}
