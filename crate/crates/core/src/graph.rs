//! Directed trip adjacency matrix, top-k inbound neighbors, and the region
//! decomposition of the station network.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::{StationMeta, TripRecord};

/// Directed trip counts between stations. Entry `(j, i)` is the number of
/// trips starting at station `j` and ending at station `i`; self-loop trips
/// are tallied separately and never participate in neighbor ranking.
#[derive(Debug, Clone)]
pub struct AdjacencyMatrix {
    station_ids: Vec<u32>,
    index: HashMap<u32, usize>,
    counts: Array2<u64>,
    self_loops: Vec<u64>,
    unresolved_trips: u64,
}

/// A station's inbound neighbors, ordered by descending inbound trip count
/// with ties and padding resolved by ascending station id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSet {
    pub station_id: u32,
    pub neighbors: Vec<u32>,
}

/// Disjoint, exhaustive station regions plus the edge-weight cutoff that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    /// Each region's members, ascending; regions ordered by smallest member.
    pub regions: Vec<Vec<u32>>,
    pub threshold_used: f64,
}

/// Per-region agreement with station metadata ZIPs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionZipPurity {
    pub region_index: usize,
    pub size: usize,
    pub modal_zip: String,
    /// Fraction of the region's stations sharing the modal ZIP.
    pub purity: f64,
}

impl AdjacencyMatrix {
    /// Tally directed trip counts over the given stations. Trips whose
    /// endpoints are not in the station list are counted and skipped.
    pub fn build(trips: &[TripRecord], stations: &[StationMeta]) -> Result<Self> {
        if stations.is_empty() {
            return Err(Error::Validation(
                "cannot build adjacency matrix over an empty station list".into(),
            ));
        }
        let mut station_ids: Vec<u32> = stations.iter().map(|s| s.station_id).collect();
        station_ids.sort_unstable();
        station_ids.dedup();
        let index: HashMap<u32, usize> = station_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let n = station_ids.len();
        let mut counts = Array2::<u64>::zeros((n, n));
        let mut self_loops = vec![0u64; n];
        let mut unresolved_trips = 0u64;
        for trip in trips {
            match (
                index.get(&trip.start_station_id),
                index.get(&trip.end_station_id),
            ) {
                (Some(&from), Some(&to)) if from == to => self_loops[from] += 1,
                (Some(&from), Some(&to)) => counts[[from, to]] += 1,
                _ => unresolved_trips += 1,
            }
        }
        Ok(AdjacencyMatrix {
            station_ids,
            index,
            counts,
            self_loops,
            unresolved_trips,
        })
    }

    pub fn station_ids(&self) -> &[u32] {
        &self.station_ids
    }

    pub fn len(&self) -> usize {
        self.station_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.station_ids.is_empty()
    }

    /// Trips from `from` to `to` (zero for self-pairs; those live in
    /// [`Self::self_loop_count`]).
    pub fn count(&self, from: u32, to: u32) -> u64 {
        match (self.index.get(&from), self.index.get(&to)) {
            (Some(&f), Some(&t)) if f != t => self.counts[[f, t]],
            _ => 0,
        }
    }

    pub fn self_loop_count(&self, station: u32) -> u64 {
        self.index.get(&station).map_or(0, |&i| self.self_loops[i])
    }

    /// Number of trips tallied into the matrix, self-loops included.
    pub fn total_trips(&self) -> u64 {
        self.counts.sum() + self.self_loops.iter().sum::<u64>()
    }

    pub fn unresolved_trips(&self) -> u64 {
        self.unresolved_trips
    }

    /// The `k` stations sending the most trips into `station`, descending;
    /// ties and the zero-count tail are ordered by ascending station id, so
    /// the set always has exactly `k` members.
    pub fn top_in_neighbors(&self, station: u32, k: usize) -> Result<NeighborSet> {
        let &target = self
            .index
            .get(&station)
            .ok_or(Error::UnknownStation(station))?;
        if k >= self.len() {
            return Err(Error::Validation(format!(
                "k = {k} must be smaller than the station count {}",
                self.len()
            )));
        }
        let mut candidates: Vec<(u64, u32)> = self
            .station_ids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != target)
            .map(|(j, &id)| (self.counts[[j, target]], id))
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(NeighborSet {
            station_id: station,
            neighbors: candidates.into_iter().take(k).map(|(_, id)| id).collect(),
        })
    }

    /// Partition stations into regions: symmetrize the trip counts, drop
    /// edges lighter than `threshold_fraction` of the total trip count, and
    /// take connected components of what remains.
    pub fn partition_regions(&self, threshold_fraction: f64) -> RegionPartition {
        let n = self.len();
        let cutoff = threshold_fraction * self.total_trips() as f64;
        let mut dsu = DisjointSet::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.counts[[i, j]] + self.counts[[j, i]];
                if w > 0 && w as f64 >= cutoff {
                    dsu.union(i, j);
                }
            }
        }
        let mut by_root: HashMap<usize, Vec<u32>> = HashMap::new();
        for i in 0..n {
            by_root
                .entry(dsu.find(i))
                .or_default()
                .push(self.station_ids[i]);
        }
        let mut regions: Vec<Vec<u32>> = by_root.into_values().collect();
        for r in &mut regions {
            r.sort_unstable();
        }
        regions.sort_by_key(|r| r[0]);
        RegionPartition {
            regions,
            threshold_used: threshold_fraction,
        }
    }

    /// Export the dense count grid with a station-id header row and column.
    /// Diagonal entries carry the self-loop counts.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["station_id".to_string()];
        header.extend(self.station_ids.iter().map(|id| id.to_string()));
        w.write_record(&header)?;
        for (i, &id) in self.station_ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            for j in 0..self.len() {
                let v = if i == j {
                    self.self_loops[i]
                } else {
                    self.counts[[i, j]]
                };
                row.push(v.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

impl RegionPartition {
    pub fn region_of(&self, station: u32) -> Option<usize> {
        self.regions
            .iter()
            .position(|r| r.binary_search(&station).is_ok())
    }

    /// Export as `station_id,region_id` pairs.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["station_id", "region_id"])?;
        for (region_id, members) in self.regions.iter().enumerate() {
            for id in members {
                w.write_record([id.to_string(), region_id.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Export neighbor sets, one row per station: `station_id,n1,...,nk`.
pub fn write_neighbors_csv(path: &Path, sets: &[NeighborSet]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let k = sets.first().map_or(0, |s| s.neighbors.len());
    let mut header = vec!["station_id".to_string()];
    header.extend((1..=k).map(|i| format!("neighbor_{i}")));
    w.write_record(&header)?;
    for set in sets {
        let mut row = vec![set.station_id.to_string()];
        row.extend(set.neighbors.iter().map(|id| id.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// For each region, the fraction of stations sharing the region's modal ZIP
/// (falling back to city when ZIPs are blank). Report only; the partition is
/// never altered.
pub fn validate_partition_zip(
    partition: &RegionPartition,
    stations: &[StationMeta],
) -> Vec<RegionZipPurity> {
    let by_id: HashMap<u32, &StationMeta> =
        stations.iter().map(|s| (s.station_id, s)).collect();
    partition
        .regions
        .iter()
        .enumerate()
        .map(|(region_index, members)| {
            let labels: Vec<String> = members
                .iter()
                .map(|id| match by_id.get(id) {
                    Some(meta) if !meta.zip_code.is_empty() => meta.zip_code.clone(),
                    Some(meta) => meta.city.clone(),
                    None => String::new(),
                })
                .collect();
            let mut tally: HashMap<&str, usize> = HashMap::new();
            for l in &labels {
                *tally.entry(l.as_str()).or_default() += 1;
            }
            let (modal_zip, count) = tally
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .map(|(z, c)| (z.to_string(), c))
                .unwrap_or_default();
            RegionZipPurity {
                region_index,
                size: members.len(),
                modal_zip,
                purity: if labels.is_empty() {
                    0.0
                } else {
                    count as f64 / labels.len() as f64
                },
            }
        })
        .collect()
}

pub fn write_zip_purity_csv(mut sink: impl Write, report: &[RegionZipPurity]) -> Result<()> {
    let mut w = csv::Writer::from_writer(&mut sink);
    w.write_record(["region_id", "size", "modal_zip", "purity"])?;
    for r in report {
        w.write_record([
            r.region_index.to_string(),
            r.size.to_string(),
            r.modal_zip.clone(),
            r.purity.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("zip purity output", e))?;
    Ok(())
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
