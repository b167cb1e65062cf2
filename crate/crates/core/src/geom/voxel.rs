use std::collections::BTreeMap;

use super::{Point3, PointCloud, Vector3};
use crate::error::{Error, Result};

/// Replace the points of every occupied voxel by their centroid.
///
/// Output order follows voxel key order. Scores are averaged; labels take
/// the value of the first member.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) {
        return Err(Error::InvalidArgument(format!("voxel size {voxel} must be > 0")));
    }
    let mut cells: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = ((p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64);
        cells.entry(key).or_default().push(i);
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut scores = cloud.scores().map(|_| Vec::with_capacity(cells.len()));
    let mut labels = cloud.labels().map(|_| Vec::with_capacity(cells.len()));
    for members in cells.values() {
        let mut acc = Vector3::zeros();
        for &i in members {
            acc += cloud.points()[i].coords;
        }
        points.push(Point3::from(acc / members.len() as f64));
        if let (Some(out), Some(s)) = (scores.as_mut(), cloud.scores()) {
            out.push(members.iter().map(|&i| s[i]).sum::<f64>() / members.len() as f64);
        }
        if let (Some(out), Some(l)) = (labels.as_mut(), cloud.labels()) {
            out.push(l[members[0]]);
        }
    }
    let mut out = PointCloud::new(points)?;
    if let Some(s) = scores {
        out = out.with_scores(s)?;
    }
    if let Some(l) = labels {
        out = out.with_labels(l)?;
    }
    Ok(out)
}
