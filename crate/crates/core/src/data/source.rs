use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use super::manifest::Manifest;
use super::normalize::{normalize, NormConstants};
use super::phantom::PhantomCase;
use super::resize::{pad_to_square, resize_bilinear};
use super::svol::svol_read;
use super::volume::{Label, RawVolume};
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Read access to labelled raw cases.
pub trait CaseSource {
    fn case_ids(&self) -> Vec<String>;
    fn label(&self, case_id: &str) -> Result<Label>;
    fn load(&self, case_id: &str) -> Result<RawVolume>;
}

impl<S: CaseSource + ?Sized> CaseSource for &S {
    fn case_ids(&self) -> Vec<String> {
        (**self).case_ids()
    }

    fn label(&self, case_id: &str) -> Result<Label> {
        (**self).label(case_id)
    }

    fn load(&self, case_id: &str) -> Result<RawVolume> {
        (**self).load(case_id)
    }
}

fn missing(case_id: &str) -> Error {
    Error::Data(format!("unknown case {case_id}"))
}

#[derive(Clone, Debug, Default)]
pub struct InMemorySource {
    cases: BTreeMap<String, (Label, RawVolume)>,
}

impl InMemorySource {
    pub fn new(cases: Vec<PhantomCase>) -> Self {
        Self {
            cases: cases.into_iter().map(|c| (c.case_id, (c.label, c.volume))).collect(),
        }
    }

    pub fn cases(&self) -> Vec<(String, Label)> {
        self.cases.iter().map(|(id, (l, _))| (id.clone(), *l)).collect()
    }
}

impl CaseSource for InMemorySource {
    fn case_ids(&self) -> Vec<String> {
        self.cases.keys().cloned().collect()
    }

    fn label(&self, case_id: &str) -> Result<Label> {
        self.cases.get(case_id).map(|c| c.0).ok_or_else(|| missing(case_id))
    }

    fn load(&self, case_id: &str) -> Result<RawVolume> {
        self.cases.get(case_id).map(|c| c.1.clone()).ok_or_else(|| missing(case_id))
    }
}

impl CaseSource for Manifest {
    fn case_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.case_id.clone()).collect();
        ids.sort();
        ids
    }

    fn label(&self, case_id: &str) -> Result<Label> {
        self.entry(case_id).map(|e| e.label).ok_or_else(|| missing(case_id))
    }

    fn load(&self, case_id: &str) -> Result<RawVolume> {
        let entry = self.entry(case_id).ok_or_else(|| missing(case_id))?;
        RawVolume::new(svol_read(&self.volume_path(entry))?)
    }
}

/// Records every case whose label or pixels are requested.
pub struct TrackingSource<S> {
    inner: S,
    touched: Mutex<BTreeSet<String>>,
}

impl<S: CaseSource> TrackingSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            touched: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn touched(&self) -> BTreeSet<String> {
        self.touched.lock().unwrap().clone()
    }

    fn note(&self, id: &str) {
        self.touched.lock().unwrap().insert(id.to_string());
    }
}

impl<S: CaseSource> CaseSource for TrackingSource<S> {
    fn case_ids(&self) -> Vec<String> {
        self.inner.case_ids()
    }

    fn label(&self, case_id: &str) -> Result<Label> {
        self.note(case_id);
        self.inner.label(case_id)
    }

    fn load(&self, case_id: &str) -> Result<RawVolume> {
        self.note(case_id);
        self.inner.load(case_id)
    }
}

/// Normalize, center on a square canvas and resize to `hw × hw`.
pub fn preprocess(raw: &RawVolume, consts: &NormConstants, hw: usize) -> Result<Tensor<f32>> {
    let norm = normalize(raw, consts)?;
    resize_bilinear(&pad_to_square(&norm, 0.0)?, hw, hw)
}

/// Preprocessed cases with integer class indices, in the order requested.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSet {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub volumes: Vec<Tensor<f32>>,
}

impl PreparedSet {
    pub fn load(source: &dyn CaseSource, ids: &[String], consts: &NormConstants, hw: usize) -> Result<Self> {
        let mut set = PreparedSet {
            ids: ids.to_vec(),
            labels: Vec::with_capacity(ids.len()),
            volumes: Vec::with_capacity(ids.len()),
        };
        for id in ids {
            set.labels.push(source.label(id)?.index());
            set.volumes.push(preprocess(&source.load(id)?, consts, hw)?);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Stacks the cases at `idx` into an `[n, hw, hw, C]` batch.
    pub fn batch(&self, idx: &[usize]) -> Result<Tensor<f32>> {
        let first = self
            .volumes
            .first()
            .ok_or_else(|| Error::Data("empty case set".into()))?;
        let mut shape = vec![idx.len()];
        shape.extend_from_slice(first.shape());
        let mut data = Vec::with_capacity(idx.len() * first.len());
        for &i in idx {
            data.extend_from_slice(self.volumes[i].data());
        }
        Tensor::from_vec(&shape, data)
    }
}

/// Fits normalization constants on `train_ids` only, reading nothing else.
pub fn fit_constants(source: &dyn CaseSource, train_ids: &[String]) -> Result<NormConstants> {
    let vols = train_ids
        .iter()
        .map(|id| source.load(id).map(|v| (id.as_str(), v)))
        .collect::<Result<Vec<_>>>()?;
    NormConstants::fit(vols.iter().map(|(id, v)| (*id, v)))
}
