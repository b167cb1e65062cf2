use super::{centroid, Point3};
use crate::error::{Error, Result};

/// An ordered set of 3-D points with optional per-point attributes.
///
/// `scores` holds a stability score in `[0, 1]` per point and `labels` an
/// integer instance label (`-1` for "no instance").
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    scores: Option<Vec<f64>>,
    labels: Option<Vec<i64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("point cloud must not be empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points, scores: None, labels: None })
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} scores for {} points",
                scores.len(),
                self.points.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidArgument(format!("score {s} outside [0, 1]")));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }

    /// Subset by index, carrying attributes along. Indices may repeat.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let mut out = Self::new(points)?;
        out.scores = self.scores.as_ref().map(|s| indices.iter().map(|&i| s[i]).collect());
        out.labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(out)
    }

    /// Replace coordinates while keeping attributes. Lengths must match.
    pub fn map_points(&self, f: impl FnMut(&Point3) -> Point3) -> Self {
        let points: Vec<Point3> = self.points.iter().map(f).collect();
        Self { points, scores: self.scores.clone(), labels: self.labels.clone() }
    }
}
