//! Discrete image-sensor catalog and nearest-entry lookup.
//!
//! Sensor selection is a categorical design variable: a genome carries either
//! a catalog index or a continuous (width, height, pixel) triplet that is
//! snapped to the nearest catalog member before evaluation. Snapping uses
//! squared Euclidean distance over the triplet — raw by default, or with each
//! component divided by its catalog range when `normalized` is set, since
//! millimeter and micrometer scales otherwise weight the components
//! arbitrarily.

use std::fmt;
use std::path::Path;

/// One catalog row: active-area dimensions in mm, pixel pitch in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEntry {
    pub id: String,
    pub manufacturer: String,
    pub sensor_w_mm: f64,
    pub sensor_h_mm: f64,
    pub pixel_um: f64,
}

impl SensorEntry {
    pub fn triplet(&self) -> [f64; 3] {
        [self.sensor_w_mm, self.sensor_h_mm, self.pixel_um]
    }
}

/// Ordered, validated sensor list with cached per-component (min, max)
/// ranges for normalized snapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorCatalog {
    entries: Vec<SensorEntry>,
    ranges: [(f64, f64); 3],
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("catalog entry '{id}' violates invariants: {msg}")]
    InvariantViolation { id: String, msg: String },
    #[error("catalog is empty")]
    EmptyCatalog,
}

const CSV_HEADER: &str = "id,manufacturer,sensor_w_mm,sensor_h_mm,pixel_um";

/// The catalog shipped with the crate (43 commercial CMOS sensors).
const BUNDLED_CSV: &str = include_str!("../data/sensors.csv");

impl SensorCatalog {
    /// Validate entries and cache component ranges.
    pub fn from_entries(entries: Vec<SensorEntry>) -> Result<Self, CatalogError> {
        if entries.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !(e.sensor_w_mm > 0.0 && e.sensor_h_mm > 0.0 && e.pixel_um > 0.0) {
                return Err(CatalogError::InvariantViolation {
                    id: e.id.clone(),
                    msg: "all dimensions must be positive".into(),
                });
            }
            let min_dim_um = 1000.0 * e.sensor_w_mm.min(e.sensor_h_mm);
            if e.pixel_um > min_dim_um {
                return Err(CatalogError::InvariantViolation {
                    id: e.id.clone(),
                    msg: "pixel pitch exceeds sensor dimensions".into(),
                });
            }
            if !seen.insert(e.id.clone()) {
                return Err(CatalogError::InvariantViolation {
                    id: e.id.clone(),
                    msg: "duplicate id".into(),
                });
            }
        }
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 3];
        for e in &entries {
            for (c, v) in e.triplet().into_iter().enumerate() {
                ranges[c].0 = ranges[c].0.min(v);
                ranges[c].1 = ranges[c].1.max(v);
            }
        }
        Ok(SensorCatalog { entries, ranges })
    }

    /// Parse catalog CSV text: required header, `#` comment lines allowed.
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut entries = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let row = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != CSV_HEADER {
                    return Err(CatalogError::Parse {
                        row,
                        msg: format!("expected header '{CSV_HEADER}'"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(CatalogError::Parse {
                    row,
                    msg: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let num = |s: &str, name: &str| -> Result<f64, CatalogError> {
                s.parse::<f64>().map_err(|_| CatalogError::Parse {
                    row,
                    msg: format!("invalid {name}: '{s}'"),
                })
            };
            entries.push(SensorEntry {
                id: fields[0].to_string(),
                manufacturer: fields[1].to_string(),
                sensor_w_mm: num(fields[2], "sensor_w_mm")?,
                sensor_h_mm: num(fields[3], "sensor_h_mm")?,
                pixel_um: num(fields[4], "pixel_um")?,
            });
        }
        SensorCatalog::from_entries(entries)
    }

    /// The 43-entry catalog bundled with the crate.
    pub fn bundled() -> Self {
        SensorCatalog::parse(BUNDLED_CSV).expect("bundled catalog must be valid")
    }

    pub fn entries(&self) -> &[SensorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> &SensorEntry {
        &self.entries[index]
    }

    /// Cached (min, max) per component: width, height, pixel.
    pub fn ranges(&self) -> [(f64, f64); 3] {
        self.ranges
    }

    /// Index of the entry nearest to (w, h, p) by squared distance.
    ///
    /// With `normalized`, each component difference is divided by the
    /// catalog's (max − min) range for that component (degenerate ranges
    /// fall back to raw). Ties go to the lowest index; an exact match
    /// returns its own entry.
    pub fn snap_index(&self, w_mm: f64, h_mm: f64, pixel_um: f64, normalized: bool) -> usize {
        debug_assert!(w_mm > 0.0 && h_mm > 0.0 && pixel_um > 0.0);
        let scale: [f64; 3] = if normalized {
            let mut s = [1.0; 3];
            for c in 0..3 {
                let range = self.ranges[c].1 - self.ranges[c].0;
                if range > 0.0 {
                    s[c] = 1.0 / range;
                }
            }
            s
        } else {
            [1.0; 3]
        };
        let q = [w_mm, h_mm, pixel_um];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, e) in self.entries.iter().enumerate() {
            let t = e.triplet();
            let mut d = 0.0;
            for c in 0..3 {
                let diff = (q[c] - t[c]) * scale[c];
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Nearest catalog entry to (w, h, p); see [`Self::snap_index`].
    pub fn snap(&self, w_mm: f64, h_mm: f64, pixel_um: f64, normalized: bool) -> &SensorEntry {
        &self.entries[self.snap_index(w_mm, h_mm, pixel_um, normalized)]
    }
}

impl fmt::Display for SensorEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}) {}x{} mm @ {} um",
            self.id, self.manufacturer, self.sensor_w_mm, self.sensor_h_mm, self.pixel_um
        )
    }
}

/// Load and validate a catalog CSV from disk.
pub fn load_catalog(path: &Path) -> Result<SensorCatalog, CatalogError> {
    let text = std::fs::read_to_string(path)?;
    SensorCatalog::parse(&text)
}
