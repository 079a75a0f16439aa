use std::fs;
use std::path::{Path, PathBuf};

use super::{split_table, CausalPair, DataError, MULTIVARIATE_IDS};
use crate::cd::Direction;
use crate::scalar::Real;

/// Pairs longer than this are stride-subsampled on load.
pub const MAX_ROWS: usize = 10_000;

const META_FILE: &str = "pairmeta.txt";

/// Loads benchmark pairs from a directory laid out like the published
/// distribution: `pairmeta.txt`, `pair%04d.txt` and `pair%04d_des.txt`.
///
/// An optional overlay directory may hold curated `pair%04d_des.txt` files
/// that take precedence over the originals.
#[derive(Debug, Clone)]
pub struct PairLoader {
    root: PathBuf,
    overlay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct MetaRow {
    cause: (usize, usize),
    effect: (usize, usize),
    weight: f64,
}

impl PairLoader {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            overlay: None,
        }
    }

    pub fn with_overlay(mut self, overlay: impl Into<PathBuf>) -> Self {
        self.overlay = Some(overlay.into());
        self
    }

    pub fn load<T: Real>(&self, id: u32) -> Result<CausalPair<T>, DataError> {
        if MULTIVARIATE_IDS.contains(&id) {
            return Err(DataError::MultivariatePair(id));
        }
        let (domain, _) = split_table().lookup(id)?;

        let meta = self.meta_row(id)?;
        if meta.cause.0 != meta.cause.1 || meta.effect.0 != meta.effect.1 {
            return Err(DataError::MultivariatePair(id));
        }
        let (cause, effect) = (meta.cause.0, meta.effect.0);
        let truth = match (cause, effect) {
            (1, 2) => Direction::Forward,
            (2, 1) => Direction::Backward,
            _ => {
                return Err(DataError::MalformedMeta {
                    path: self.root.join(META_FILE),
                    reason: format!("pair {id}: cause/effect columns {cause}/{effect}"),
                })
            }
        };

        let data_path = self.root.join(format!("pair{id:04}.txt"));
        let (x_u, x_v) = read_two_columns::<T>(&data_path)?;
        let description = self.read_description(id)?;

        let pair = CausalPair {
            id,
            name_u: "x".to_string(),
            name_v: "y".to_string(),
            x_u,
            x_v,
            description,
            domain,
            truth,
            weight: T::lit(meta.weight),
        };
        pair.validate()?;
        Ok(pair)
    }

    fn meta_row(&self, id: u32) -> Result<MetaRow, DataError> {
        let path = self.root.join(META_FILE);
        let text = read_to_string(&path)?;
        let malformed = |reason: String| DataError::MalformedMeta {
            path: path.clone(),
            reason,
        };
        for (lineno, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let row_id: u32 = fields[0]
                .parse()
                .map_err(|_| malformed(format!("line {}: bad id {:?}", lineno + 1, fields[0])))?;
            if row_id != id {
                continue;
            }
            if fields.len() < 5 {
                return Err(malformed(format!("line {}: expected 6 fields", lineno + 1)));
            }
            let col = |i: usize| -> Result<usize, DataError> {
                fields[i]
                    .parse()
                    .map_err(|_| malformed(format!("line {}: bad column index", lineno + 1)))
            };
            let weight = match fields.get(5) {
                Some(w) => w
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w > 0.0)
                    .ok_or_else(|| malformed(format!("line {}: bad weight", lineno + 1)))?,
                None => 1.0,
            };
            return Ok(MetaRow {
                cause: (col(1)?, col(2)?),
                effect: (col(3)?, col(4)?),
                weight,
            });
        }
        Err(malformed(format!("no row for pair {id}")))
    }

    fn read_description(&self, id: u32) -> Result<String, DataError> {
        let name = format!("pair{id:04}_des.txt");
        if let Some(overlay) = &self.overlay {
            let p = overlay.join(&name);
            if p.is_file() {
                return read_to_string(&p);
            }
        }
        read_to_string(&self.root.join(name))
    }
}

/// Loads one pair from `root` with no description overlay.
pub fn load_pair<T: Real>(root: impl AsRef<Path>, id: u32) -> Result<CausalPair<T>, DataError> {
    PairLoader::new(root.as_ref()).load(id)
}

fn read_to_string(path: &Path) -> Result<String, DataError> {
    match fs::read(path) {
        // some benchmark descriptions are latin-1
        Ok(bytes) => Ok(String::from_utf8_lossy(&bytes).into_owned()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(DataError::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

/// First two whitespace-separated columns of a numeric file; longer files
/// are subsampled to [`MAX_ROWS`] rows at an even stride.
pub fn read_two_columns<T: Real>(path: &Path) -> Result<(Vec<T>, Vec<T>), DataError> {
    let text = read_to_string(path)?;
    let malformed = |reason: String| DataError::MalformedNumeric {
        path: path.to_path_buf(),
        reason,
    };
    let mut width = None;
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(malformed(format!(
                    "line {}: {} fields, expected {w}",
                    lineno + 1,
                    fields.len()
                )))
            }
            _ => {}
        }
        if fields.len() < 2 {
            return Err(malformed(format!("line {}: fewer than 2 columns", lineno + 1)));
        }
        let parse = |s: &str| -> Result<T, DataError> {
            let x: f64 = s
                .parse()
                .map_err(|_| malformed(format!("line {}: not a number: {s:?}", lineno + 1)))?;
            if !x.is_finite() {
                return Err(malformed(format!("line {}: non-finite value {s:?}", lineno + 1)));
            }
            Ok(T::lit(x))
        };
        u.push(parse(fields[0])?);
        v.push(parse(fields[1])?);
    }
    if u.len() > MAX_ROWS {
        u = stride_subsample(&u, MAX_ROWS);
        v = stride_subsample(&v, MAX_ROWS);
    }
    Ok((u, v))
}

fn stride_subsample<T: Copy>(xs: &[T], target: usize) -> Vec<T> {
    let n = xs.len();
    (0..target).map(|i| xs[i * n / target]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        f.write_all(body.as_bytes()).unwrap();
    }

    fn fixture(meta: &str, data: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "pairmeta.txt", meta);
        write(dir.path(), "pair0001.txt", data);
        write(dir.path(), "pair0001_des.txt", "altitude and temperature of weather stations");
        dir
    }

    #[test]
    fn loads_forward_pair() {
        let dir = fixture("0001 1 1 2 2 0.5\n", "1.0 2.0\n2.0 4.1\n3.0 5.9\n");
        let p: CausalPair = load_pair(dir.path(), 1).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.truth, Direction::Forward);
        assert_eq!(p.x_v, vec![2.0, 4.1, 5.9]);
        assert_eq!(p.weight, 0.5);
        assert_eq!(p.domain, crate::data::Domain::ClimateEnvironment);
    }

    #[test]
    fn backward_when_cause_is_second_column() {
        let dir = fixture("0001 2 2 1 1 1\n", "1 2\n2 3\n");
        let p: CausalPair<f32> = load_pair(dir.path(), 1).unwrap();
        assert_eq!(p.truth, Direction::Backward);
    }

    #[test]
    fn multivariate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_pair::<f64>(dir.path(), 52),
            Err(DataError::MultivariatePair(52))
        ));
        let dir = fixture("0001 1 2 3 3 1\n", "1 2 3\n2 3 4\n");
        assert!(matches!(
            load_pair::<f64>(dir.path(), 1),
            Err(DataError::MultivariatePair(1))
        ));
    }

    #[test]
    fn nan_cell_is_malformed() {
        let dir = fixture("0001 1 1 2 2 1\n", "1 2\nnan 3\n4 5\n");
        assert!(matches!(
            load_pair::<f64>(dir.path(), 1),
            Err(DataError::MalformedNumeric { .. })
        ));
    }

    #[test]
    fn ragged_rows_are_malformed() {
        let dir = fixture("0001 1 1 2 2 1\n", "1 2\n3\n");
        assert!(matches!(
            load_pair::<f64>(dir.path(), 1),
            Err(DataError::MalformedNumeric { .. })
        ));
    }

    #[test]
    fn missing_files_and_unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_pair::<f64>(dir.path(), 1),
            Err(DataError::MissingFile(_))
        ));
        assert!(matches!(
            load_pair::<f64>(dir.path(), 500),
            Err(DataError::UnknownId(500))
        ));
    }

    #[test]
    fn overlay_shadows_description() {
        let dir = fixture("0001 1 1 2 2 1\n", "1 2\n2 3\n");
        let overlay = tempfile::tempdir().unwrap();
        write(overlay.path(), "pair0001_des.txt", "curated text");
        let p: CausalPair = PairLoader::new(dir.path())
            .with_overlay(overlay.path())
            .load(1)
            .unwrap();
        assert_eq!(p.description, "curated text");
    }

    #[test]
    fn long_pairs_are_subsampled() {
        let rows: String = (0..25_000).map(|i| format!("{i} {}\n", 2 * i)).collect();
        let dir = fixture("0001 1 1 2 2 1\n", &rows);
        let p: CausalPair = load_pair(dir.path(), 1).unwrap();
        assert_eq!(p.len(), MAX_ROWS);
        assert_eq!(p.x_u[0], 0.0);
        assert_eq!(p.x_u[1], 2.0);
        assert_eq!(p.x_v[MAX_ROWS - 1], 2.0 * 24_997.0);
    }

    #[test]
    fn loading_is_deterministic() {
        let dir = fixture("0001 1 1 2 2 1\n", "1 2\n2 3\n5 1\n");
        let a: CausalPair = load_pair(dir.path(), 1).unwrap();
        let b: CausalPair = load_pair(dir.path(), 1).unwrap();
        assert_eq!(a, b);
    }
}
