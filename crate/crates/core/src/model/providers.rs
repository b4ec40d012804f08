//! Optional extra feature blocks appended after the low-level features.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{UiElement, UiScreen};

/// A source of a fixed-length feature block per element.
pub trait FeatureProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn features(&self, screen: &UiScreen, element: &UiElement) -> Result<Vec<f32>>;
}

/// Provider identity as stored in checkpoint metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookSpec {
    pub id: String,
    pub dim: usize,
}

/// Provider backed by a closure.
pub struct FnProvider<F> {
    id: String,
    dim: usize,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&UiScreen, &UiElement) -> Vec<f32> + Send + Sync,
{
    pub fn new(id: impl Into<String>, dim: usize, f: F) -> Self {
        Self { id: id.into(), dim, f }
    }
}

impl<F> FeatureProvider for FnProvider<F>
where
    F: Fn(&UiScreen, &UiElement) -> Vec<f32> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn features(&self, screen: &UiScreen, element: &UiElement) -> Result<Vec<f32>> {
        Ok((self.f)(screen, element))
    }
}

/// A block of zeros; stands in for an external feature source.
pub struct ZeroProvider {
    id: String,
    dim: usize,
}

impl ZeroProvider {
    pub fn new(id: impl Into<String>, dim: usize) -> Self {
        Self { id: id.into(), dim }
    }
}

impl FeatureProvider for ZeroProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn features(&self, _: &UiScreen, _: &UiElement) -> Result<Vec<f32>> {
        Ok(vec![0.0; self.dim])
    }
}

#[derive(Clone, Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, Arc<dyn FeatureProvider>>,
}

impl fmt::Debug for ProviderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.providers.keys()).finish()
    }
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, provider: Arc<dyn FeatureProvider>) -> Result<()> {
        let id = provider.id().to_string();
        if self.providers.contains_key(&id) {
            return Err(Error::Config(format!("feature provider `{id}` registered twice")));
        }
        self.providers.insert(id, provider);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn FeatureProvider>> {
        self.providers
            .get(id)
            .ok_or_else(|| Error::UnknownProvider(id.to_string()))
    }

    pub fn specs(&self, ids: &[String]) -> Result<Vec<HookSpec>> {
        ids.iter()
            .map(|id| {
                let p = self.get(id)?;
                Ok(HookSpec {
                    id: id.clone(),
                    dim: p.dim(),
                })
            })
            .collect()
    }

    /// Looks up every hook and checks its declared block length.
    pub fn resolve(&self, hooks: &[HookSpec]) -> Result<Vec<Arc<dyn FeatureProvider>>> {
        hooks
            .iter()
            .map(|h| {
                let p = self.get(&h.id)?;
                if p.dim() != h.dim {
                    return Err(Error::Config(format!(
                        "provider `{}` yields {} features, model expects {}",
                        h.id,
                        p.dim(),
                        h.dim
                    )));
                }
                Ok(Arc::clone(p))
            })
            .collect()
    }
}

/// Features from every hook for one element, checked against declared lengths.
pub(crate) fn hook_block(
    providers: &[Arc<dyn FeatureProvider>],
    screen: &UiScreen,
    element: &UiElement,
) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for p in providers {
        let block = p.features(screen, element)?;
        if block.len() != p.dim() {
            return Err(Error::Invalid(format!(
                "provider `{}` returned {} values, declared {}",
                p.id(),
                block.len(),
                p.dim()
            )));
        }
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "provider `{}` returned a non-finite value",
                p.id()
            )));
        }
        out.extend(block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_duplicate() {
        let mut r = ProviderRegistry::new();
        r.register(Arc::new(ZeroProvider::new("z", 8))).unwrap();
        assert!(r.register(Arc::new(ZeroProvider::new("z", 3))).is_err());
        assert!(matches!(r.get("salnet"), Err(Error::UnknownProvider(_))));
        assert_eq!(
            r.specs(&["z".into()]).unwrap(),
            vec![HookSpec { id: "z".into(), dim: 8 }]
        );
    }

    #[test]
    fn resolve_checks_dims() {
        let mut r = ProviderRegistry::new();
        r.register(Arc::new(ZeroProvider::new("z", 8))).unwrap();
        assert!(r.resolve(&[HookSpec { id: "z".into(), dim: 8 }]).is_ok());
        assert!(r.resolve(&[HookSpec { id: "z".into(), dim: 9 }]).is_err());
    }
}
