//! Clustered two-group data: ingestion, validation and derived index sets.
//!
//! Clusters are kept in a canonical order (sorted by id) and members inside a
//! cluster are sorted by value, so the dataset built from any permutation of
//! the same rows is identical.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::One => Group::Two,
            Group::Two => Group::One,
        }
    }

    /// The 0/1 membership indicator (`g = 1` means group 2).
    pub fn indicator(self) -> f64 {
        match self {
            Group::One => 0.0,
            Group::Two => 1.0,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::One => f.write_str("1"),
            Group::Two => f.write_str("2"),
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Group::One),
            "2" => Ok(Group::Two),
            other => Err(Error::BadGroup(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cluster_id: String,
    pub group: Group,
    pub value: f64,
}

impl Observation {
    pub fn new(cluster_id: impl Into<String>, group: Group, value: f64) -> Self {
        Observation {
            cluster_id: cluster_id.into(),
            group,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterKind {
    /// Only group-1 members.
    IncompleteOne,
    /// Only group-2 members.
    IncompleteTwo,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    id: String,
    members: Vec<(f64, Group)>,
    values_g1: Vec<f64>,
    values_g2: Vec<f64>,
}

impl Cluster {
    pub fn new(id: impl Into<String>, values_g1: Vec<f64>, values_g2: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let members = values_g1
            .iter()
            .map(|&v| (v, Group::One))
            .chain(values_g2.iter().map(|&v| (v, Group::Two)))
            .collect();
        Self::from_members(id, members)
    }

    fn from_members(id: String, mut members: Vec<(f64, Group)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!("cluster `{id}` is empty")));
        }
        if let Some(&(value, _)) = members.iter().find(|(v, _)| !v.is_finite()) {
            return Err(Error::NonFinite { cluster: id, value });
        }
        // Stable by value only: relabeling and monotone maps keep member positions.
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values_g1 = members
            .iter()
            .filter(|(_, g)| *g == Group::One)
            .map(|(v, _)| *v)
            .collect();
        let values_g2 = members
            .iter()
            .filter(|(_, g)| *g == Group::Two)
            .map(|(v, _)| *v)
            .collect();
        Ok(Cluster {
            id,
            members,
            values_g1,
            values_g2,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// All members, sorted by value. Among equal values, clusters built with
    /// [`Cluster::new`] list group 1 first; relabeled clusters keep positions.
    pub fn members(&self) -> &[(f64, Group)] {
        &self.members
    }

    pub fn values(&self, group: Group) -> &[f64] {
        match group {
            Group::One => &self.values_g1,
            Group::Two => &self.values_g2,
        }
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn m1(&self) -> usize {
        self.values_g1.len()
    }

    pub fn m2(&self) -> usize {
        self.values_g2.len()
    }

    pub fn size(&self, group: Group) -> usize {
        self.values(group).len()
    }

    /// Proportion of group-2 members, `m2 / m`.
    pub fn alpha(&self) -> f64 {
        self.m2() as f64 / self.m() as f64
    }

    pub fn kind(&self) -> ClusterKind {
        match (self.m1() > 0, self.m2() > 0) {
            (true, true) => ClusterKind::Complete,
            (true, false) => ClusterKind::IncompleteOne,
            _ => ClusterKind::IncompleteTwo,
        }
    }

    pub fn contains(&self, group: Group) -> bool {
        self.size(group) > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    clusters: Vec<Cluster>,
    n1: usize,
    n2: usize,
    nc: usize,
    total_g1: usize,
    total_g2: usize,
    r1: Vec<usize>,
    r2: Vec<usize>,
}

impl ClusteredDataset {
    /// Groups rows by cluster id and validates the result.
    pub fn ingest<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = Observation>,
    {
        let mut by_id: HashMap<String, Vec<(f64, Group)>> = HashMap::new();
        let mut any = false;
        for row in rows {
            any = true;
            if !row.value.is_finite() {
                return Err(Error::NonFinite {
                    cluster: row.cluster_id,
                    value: row.value,
                });
            }
            by_id
                .entry(row.cluster_id)
                .or_default()
                .push((row.value, row.group));
        }
        if !any {
            return Err(Error::EmptyInput);
        }
        let clusters = by_id
            .into_iter()
            .map(|(id, members)| Cluster::from_members(id, members))
            .collect::<Result<Vec<_>>>()?;
        Self::from_clusters(clusters)
    }

    /// Builds a dataset from already-formed clusters. Ids must be unique.
    pub fn from_clusters(mut clusters: Vec<Cluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyInput);
        }
        clusters.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = clusters.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate cluster id `{}`",
                w[0].id
            )));
        }
        let (mut n1, mut n2, mut nc) = (0, 0, 0);
        let (mut r1, mut r2) = (Vec::new(), Vec::new());
        for (i, c) in clusters.iter().enumerate() {
            match c.kind() {
                ClusterKind::IncompleteOne => n1 += 1,
                ClusterKind::IncompleteTwo => n2 += 1,
                ClusterKind::Complete => nc += 1,
            }
            if c.m1() > 0 {
                r1.push(i);
            }
            if c.m2() > 0 {
                r2.push(i);
            }
        }
        let total_g1 = clusters.iter().map(Cluster::m1).sum();
        let total_g2 = clusters.iter().map(Cluster::m2).sum();
        if total_g1 == 0 {
            return Err(Error::MissingGroup(Group::One));
        }
        if total_g2 == 0 {
            return Err(Error::MissingGroup(Group::Two));
        }
        Ok(ClusteredDataset {
            clusters,
            n1,
            n2,
            nc,
            total_g1,
            total_g2,
            r1,
            r2,
        })
    }

    /// Reads the `cluster,group,value` CSV format. Lines starting with `#` are skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header_err = |message: String| Error::Parse { line: 1, message };
        let headers = rdr
            .headers()
            .map_err(|e| header_err(e.to_string()))?
            .clone();
        let expected = ["cluster", "group", "value"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(header_err(format!(
                "expected header `cluster,group,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let group = record[1].parse::<Group>()?;
            let value = record[2].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("value `{}`: {e}", &record[2]),
            })?;
            rows.push(Observation::new(&record[0], group, value));
        }
        Self::ingest(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["cluster", "group", "value"])?;
        for obs in self.observations() {
            wtr.write_record([
                obs.cluster_id,
                obs.group.to_string(),
                format!("{:?}", obs.value),
            ])?;
        }
        wtr.flush()
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.clusters.iter().flat_map(|c| {
            c.members
                .iter()
                .map(move |&(value, group)| Observation::new(c.id.clone(), group, value))
        })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, index: usize) -> &Cluster {
        &self.clusters[index]
    }

    pub fn n(&self) -> usize {
        self.clusters.len()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    /// Total number of observations in `group`.
    pub fn total(&self, group: Group) -> usize {
        match group {
            Group::One => self.total_g1,
            Group::Two => self.total_g2,
        }
    }

    /// Indices of clusters containing at least one member of `group`.
    pub fn clusters_with(&self, group: Group) -> &[usize] {
        match group {
            Group::One => &self.r1,
            Group::Two => &self.r2,
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.clusters.iter().map(Cluster::alpha).collect()
    }

    pub fn kinds(&self) -> Vec<ClusterKind> {
        self.clusters.iter().map(Cluster::kind).collect()
    }

    /// Relabels group 1 as group 2 and vice versa.
    pub fn swap_groups(&self) -> Self {
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                let members = c.members.iter().map(|&(v, g)| (v, g.other())).collect();
                Cluster::from_members(c.id.clone(), members).expect("relabeling keeps validity")
            })
            .collect();
        Self::from_clusters(clusters).expect("relabeling keeps validity")
    }

    /// Applies `f` to every value. Fails if `f` produces a non-finite value.
    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                let members = c.members.iter().map(|&(v, g)| (f(v), g)).collect();
                Cluster::from_members(c.id.clone(), members)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_clusters(clusters)
    }

    pub fn summary(&self) -> Summary {
        let mut size_distribution = BTreeMap::new();
        for c in &self.clusters {
            *size_distribution.entry(c.m()).or_insert(0) += 1;
        }
        Summary {
            n: self.n(),
            n1: self.n1,
            n2: self.n2,
            nc: self.nc,
            total_g1: self.total_g1,
            total_g2: self.total_g2,
            size_distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
    #[serde(rename = "N1")]
    pub total_g1: usize,
    #[serde(rename = "N2")]
    pub total_g2: usize,
    /// Cluster size -> number of clusters with that size.
    pub size_distribution: BTreeMap<usize, usize>,
}
