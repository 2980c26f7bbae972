//! Model variants for the ablation lattice.

use crate::error::HgnError;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    Avg,
    Max,
}

impl FromStr for Pooling {
    type Err = HgnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "avg" => Ok(Pooling::Avg),
            "max" => Ok(Pooling::Max),
            other => Err(HgnError::Config(format!(
                "unknown pooling `{other}` (expected avg or max)"
            ))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Avg => "avg",
            Pooling::Max => "max",
        })
    }
}

/// Named ablation rows. `Hgn` is the full model: both gates, configured
/// pooling, and the item-item product. The named gate rows pin their own
/// pooling; `Bpr` and `Hgn` take it from the run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Bpr,
    FeatureAvg,
    FeatureMax,
    InstanceAvg,
    InstanceMax,
    FeatureInstanceAvg,
    FeatureInstanceMax,
    Hgn,
}

impl Variant {
    /// The eight ablation rows in their fixed report order.
    pub const ALL: [Variant; 8] = [
        Variant::Bpr,
        Variant::FeatureAvg,
        Variant::FeatureMax,
        Variant::InstanceAvg,
        Variant::InstanceMax,
        Variant::FeatureInstanceAvg,
        Variant::FeatureInstanceMax,
        Variant::Hgn,
    ];

    pub fn architecture(self, default_pooling: Pooling) -> Architecture {
        use Variant::*;
        match self {
            Bpr => Architecture {
                feature_gate: false,
                instance_gate: false,
                short_term: false,
                item_item: false,
                pooling: default_pooling,
            },
            FeatureAvg => Architecture::gated(true, false, Pooling::Avg),
            FeatureMax => Architecture::gated(true, false, Pooling::Max),
            InstanceAvg => Architecture::gated(false, true, Pooling::Avg),
            InstanceMax => Architecture::gated(false, true, Pooling::Max),
            FeatureInstanceAvg => Architecture::gated(true, true, Pooling::Avg),
            FeatureInstanceMax => Architecture::gated(true, true, Pooling::Max),
            Hgn => Architecture {
                feature_gate: true,
                instance_gate: true,
                short_term: true,
                item_item: true,
                pooling: default_pooling,
            },
        }
    }
}

impl FromStr for Variant {
    type Err = HgnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BPR" => Ok(Variant::Bpr),
            "BPR+F+AVG" => Ok(Variant::FeatureAvg),
            "BPR+F+MAX" => Ok(Variant::FeatureMax),
            "BPR+I+AVG" => Ok(Variant::InstanceAvg),
            "BPR+I+MAX" => Ok(Variant::InstanceMax),
            "BPR+F+I+AVG" => Ok(Variant::FeatureInstanceAvg),
            "BPR+F+I+MAX" => Ok(Variant::FeatureInstanceMax),
            "HGN" => Ok(Variant::Hgn),
            other => Err(HgnError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Bpr => "BPR",
            Variant::FeatureAvg => "BPR+F+avg",
            Variant::FeatureMax => "BPR+F+max",
            Variant::InstanceAvg => "BPR+I+avg",
            Variant::InstanceMax => "BPR+I+max",
            Variant::FeatureInstanceAvg => "BPR+F+I+avg",
            Variant::FeatureInstanceMax => "BPR+F+I+max",
            Variant::Hgn => "HGN",
        })
    }
}

/// Which score terms and gates a forward/backward pass uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub feature_gate: bool,
    pub instance_gate: bool,
    /// Include the pooled short-term term in the score.
    pub short_term: bool,
    /// Include the item-item product term in the score.
    pub item_item: bool,
    pub pooling: Pooling,
}

impl Architecture {
    fn gated(feature: bool, instance: bool, pooling: Pooling) -> Self {
        Architecture {
            feature_gate: feature,
            instance_gate: instance,
            short_term: true,
            item_item: false,
            pooling,
        }
    }

    /// The context embedding matrix is read at all unless the model is
    /// plain matrix factorization.
    pub fn uses_context(&self) -> bool {
        self.short_term || self.item_item
    }
}
