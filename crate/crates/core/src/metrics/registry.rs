use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::Image;

use super::{Fingerprint, MetricOptions, MetricSpec};

/// A full-reference metric that can be attached to the harness.
///
/// External metrics (for example a learned perceptual distance) implement this
/// trait and are registered under their own id. Plugins are treated as
/// windowed: masked evaluation hands them the cropped rectangle.
pub trait ReferenceMetric: Send + Sync {
    fn id(&self) -> &str;

    /// Canonical parameters; must contain `metric=<id>`.
    fn fingerprint(&self) -> Fingerprint;

    fn evaluate(&self, reference: &Image, test: &Image) -> Result<f64>;
}

impl ReferenceMetric for MetricSpec {
    fn id(&self) -> &str {
        MetricSpec::id(self)
    }

    fn fingerprint(&self) -> Fingerprint {
        MetricSpec::fingerprint(self)
    }

    fn evaluate(&self, reference: &Image, test: &Image) -> Result<f64> {
        MetricSpec::evaluate(self, reference, test).map(|s| s.value)
    }
}

/// Metrics addressable by id.
#[derive(Clone, Default)]
pub struct MetricRegistry {
    metrics: BTreeMap<String, Arc<dyn ReferenceMetric>>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        MetricRegistry::default()
    }

    /// Every built-in image metric with default parameters.
    pub fn with_builtins() -> Self {
        let mut reg = MetricRegistry::new();
        for id in super::METRIC_IDS.iter().filter(|&&id| id != "dice") {
            let spec = MetricSpec::from_id(id, MetricOptions::default()).expect("builtin id");
            reg.register(Arc::new(spec)).expect("builtin ids are unique");
        }
        reg
    }

    pub fn register(&mut self, metric: Arc<dyn ReferenceMetric>) -> Result<()> {
        let id = metric.id().to_string();
        if self.metrics.contains_key(&id) {
            return Err(Error::InvalidParam(format!("metric `{id}` is already registered")));
        }
        self.metrics.insert(id, metric);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn ReferenceMetric>> {
        self.metrics.get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.metrics.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ids()).finish()
    }
}
