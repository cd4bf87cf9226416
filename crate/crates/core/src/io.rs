//! Checkpoints, PPM/PGM images and CSV reports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::BasinMap;
use crate::linalg::Mat;
use crate::net::{Net, NetError, Nonlin};

pub const MAGIC: &[u8; 5] = b"AMEM1";
pub const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic, not a checkpoint")]
    BadMagic,
    #[error("checkpoint version {found}, expected {expected}")]
    Version { found: u8, expected: u8 },
    #[error("checkpoint is {got} bytes, header implies {expected}")]
    Length { expected: usize, got: usize },
    #[error("checkpoint truncated inside the header")]
    Truncated,
    #[error("unknown nonlinearity id {0}")]
    UnknownNonlin(u8),
    #[error("{0}")]
    Shape(String),
    #[error("non-ASCII text in CSV field {0:?}")]
    NonAscii(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Net(#[from] NetError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes `net` in the checkpoint layout.
pub fn encode_net(net: &Net) -> Vec<u8> {
    let dims = net.dims();
    let mut out = Vec::with_capacity(header_len(net.depth()) + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(net.depth() as u32).to_le_bytes());
    for &k in dims {
        out.extend_from_slice(&(k as u32).to_le_bytes());
    }
    out.push(net.nonlin().id_byte());
    out.extend_from_slice(&net.nonlin().param().to_le_bytes());
    for w in net.weights() {
        for v in w.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn header_len(depth: usize) -> usize {
    MAGIC.len() + 1 + 4 + 4 * (depth + 1) + 1 + 8
}

fn u32_at(bytes: &[u8], at: usize) -> Result<usize, IoError> {
    let b = bytes.get(at..at + 4).ok_or(IoError::Truncated)?;
    Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
}

pub fn decode_net(bytes: &[u8]) -> Result<Net, IoError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            IoError::Truncated
        } else {
            IoError::BadMagic
        });
    }
    if &bytes[..5] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = *bytes.get(5).ok_or(IoError::Truncated)?;
    if version != VERSION {
        return Err(IoError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let depth = u32_at(bytes, 6)?;
    if depth == 0 {
        return Err(IoError::Shape("depth 0".into()));
    }
    let header = header_len(depth);
    if bytes.len() < header {
        return Err(IoError::Truncated);
    }
    let dims: Vec<usize> = (0..=depth).map(|i| u32_at(bytes, 10 + 4 * i)).collect::<Result<_, _>>()?;
    let at = 10 + 4 * (depth + 1);
    let id = bytes[at];
    let param = f64::from_le_bytes(bytes[at + 1..at + 9].try_into().unwrap());
    let nonlin = Nonlin::from_id(id, param).ok_or(IoError::UnknownNonlin(id))?;
    let count: usize = dims.windows(2).map(|w| w[0] * w[1]).sum();
    let expected = header + 8 * count;
    if bytes.len() != expected {
        return Err(IoError::Length {
            expected,
            got: bytes.len(),
        });
    }
    let mut pos = header;
    let mut weights = Vec::with_capacity(depth);
    for w in dims.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let data: Vec<f64> = bytes[pos..pos + 8 * rows * cols]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += 8 * rows * cols;
        weights.push(Mat::from_vec(rows, cols, data).map_err(|e| IoError::Shape(e.to_string()))?);
    }
    Ok(Net::new(weights, nonlin)?)
}

pub fn save_net(net: &Net, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, encode_net(net)).map_err(io_err(path))
}

pub fn load_net(path: &Path) -> Result<Net, IoError> {
    let mut bytes = vec![];
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    decode_net(&bytes)
}

fn to_byte(v: f64) -> u8 {
    // NaN maps to 0.
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary P6, `pixels` row-major with `h·w` RGB triples in `[0, 1]`.
pub fn write_ppm(pixels: &[[f64; 3]], h: usize, w: usize, path: &Path) -> Result<(), IoError> {
    if pixels.len() != h * w {
        return Err(IoError::Shape(format!("{} pixels for {h}x{w}", pixels.len())));
    }
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    bytes.extend(pixels.iter().flat_map(|p| p.map(to_byte)));
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Binary P5 grayscale.
pub fn write_pgm(pixels: &[f64], h: usize, w: usize, path: &Path) -> Result<(), IoError> {
    if pixels.len() != h * w {
        return Err(IoError::Shape(format!("{} pixels for {h}x{w}", pixels.len())));
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(pixels.iter().map(|&p| to_byte(p)));
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Color for a basin label; −1 (no training example) is black.
pub fn palette(label: i64) -> [f64; 3] {
    if label < 0 {
        return [0.0, 0.0, 0.0];
    }
    // Golden-ratio hue steps keep neighbouring labels apart.
    let hue = (label as f64 * 0.618_033_988_749_895).fract();
    let (s, v) = if (label / 8) % 2 == 0 { (0.65, 0.95) } else { (0.9, 0.7) };
    hsv_to_rgb(hue, s, v)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let i = h6.floor() as i64 % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Pixels of a basin map with the top row at the largest y. Cells holding a
/// training point are drawn white.
pub fn render_basin(map: &BasinMap, train: &[Vec<f64>]) -> Vec<[f64; 3]> {
    let b = &map.bounds;
    let mut marked = vec![false; map.nx * map.ny];
    for x in train {
        let i = ((x[0] - b.x_min) / (b.x_max - b.x_min) * map.nx as f64).floor();
        let j = ((x[1] - b.y_min) / (b.y_max - b.y_min) * map.ny as f64).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < map.nx && (j as usize) < map.ny {
            marked[j as usize * map.nx + i as usize] = true;
        }
    }
    let mut out = Vec::with_capacity(map.nx * map.ny);
    for j in (0..map.ny).rev() {
        for i in 0..map.nx {
            let c = j * map.nx + i;
            out.push(if marked[c] { [1.0; 3] } else { palette(map.labels[c]) });
        }
    }
    out
}

/// Grayscale pixels of a unit-range image vector.
pub fn write_image_vector(x: &[f64], shape: (usize, usize), path: &Path) -> Result<(), IoError> {
    write_pgm(x, shape.0, shape.1, path)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Int(i64),
    Real(f64),
    Text(String),
    Empty,
}

impl CsvValue {
    pub fn render(&self) -> Result<String, IoError> {
        Ok(match self {
            CsvValue::Int(i) => i.to_string(),
            // 17 significant digits round-trip any f64.
            CsvValue::Real(v) => format!("{v:.16e}"),
            CsvValue::Text(s) if !s.is_ascii() => return Err(IoError::NonAscii(s.clone())),
            CsvValue::Text(s) => s.clone(),
            CsvValue::Empty => String::new(),
        })
    }
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Real(v)
    }
}

impl From<usize> for CsvValue {
    fn from(v: usize) -> Self {
        CsvValue::Int(v as i64)
    }
}

impl From<i64> for CsvValue {
    fn from(v: i64) -> Self {
        CsvValue::Int(v)
    }
}

impl From<&str> for CsvValue {
    fn from(v: &str) -> Self {
        CsvValue::Text(v.to_string())
    }
}

impl From<String> for CsvValue {
    fn from(v: String) -> Self {
        CsvValue::Text(v)
    }
}

impl<T: Into<CsvValue>> From<Option<T>> for CsvValue {
    fn from(v: Option<T>) -> Self {
        v.map_or(CsvValue::Empty, Into::into)
    }
}

/// Writes a header row then `rows`; every row must match the header width.
pub fn write_csv_to<W: Write>(out: W, header: &[&str], rows: &[Vec<CsvValue>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(h) = header.iter().find(|h| !h.is_ascii()) {
        return Err(IoError::NonAscii(h.to_string()));
    }
    w.write_record(header)?;
    for (r, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(IoError::Shape(format!(
                "row {r} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let fields: Vec<String> = row.iter().map(CsvValue::render).collect::<Result<_, _>>()?;
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<CsvValue>]) -> Result<(), IoError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_csv_to(BufWriter::new(f), header, rows)
}

/// Header and string records of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{init, InitScheme};

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = init(&[5, 7, 3, 5], Nonlin::LeakyRelu(0.2), &InitScheme::Uniform(0.3), 4).unwrap();
        let bytes = encode_net(&net);
        assert_eq!(bytes.len(), header_len(3) + 8 * (35 + 21 + 15));
        let back = decode_net(&bytes).unwrap();
        assert_eq!(back.dims(), net.dims());
        assert_eq!(back.nonlin(), net.nonlin());
        for (a, b) in back.weights().iter().zip(net.weights()) {
            let same = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.amem");
        save_net(&net, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
        assert_eq!(encode_net(&load_net(&p).unwrap()), bytes);
    }

    #[test]
    fn hand_built_single_layer() {
        let mut b = b"AMEM1".to_vec();
        b.push(1);
        b.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0]);
        b.push(9);
        b.extend_from_slice(&[0; 8]);
        for v in [1.0f64, -2.0, 0.5, 4.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let net = decode_net(&b).unwrap();
        assert_eq!(net.nonlin(), Nonlin::Identity);
        assert_eq!(net.weights()[0].data(), &[1.0, -2.0, 0.5, 4.0]);
        assert_eq!(net.weights()[0][(1, 0)], 0.5);
    }

    #[test]
    fn checkpoint_errors() {
        let net = Net::zeros(&[2, 3, 2], Nonlin::Relu).unwrap();
        let bytes = encode_net(&net);
        assert!(matches!(decode_net(&bytes[..bytes.len() - 3]), Err(IoError::Length { .. })));
        assert!(matches!(decode_net(&bytes[..12]), Err(IoError::Truncated)));
        assert!(matches!(decode_net(b"AMEM"), Err(IoError::Truncated)));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_net(&bad), Err(IoError::BadMagic)));
        let mut bad = bytes.clone();
        bad[5] = 2;
        assert!(matches!(decode_net(&bad), Err(IoError::Version { found: 2, .. })));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_net(&long), Err(IoError::Length { .. })));
    }

    #[test]
    fn ppm_and_pgm_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        write_ppm(&[[0.0; 3]; 6], 2, 3, &p).unwrap();
        let b = std::fs::read(&p).unwrap();
        assert_eq!(&b[..11], b"P6\n3 2\n255\n");
        assert_eq!(b.len(), 11 + 18);
        assert!(b[11..].iter().all(|&x| x == 0));
        write_ppm(&[[1.0, 2.0, -1.0]], 1, 1, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap()[11..], [255, 255, 0]);
        let g = dir.path().join("a.pgm");
        write_pgm(&[0.5, 1.0], 1, 2, &g).unwrap();
        assert_eq!(std::fs::read(&g).unwrap(), b"P5\n2 1\n255\n\x80\xff");
        assert!(write_pgm(&[0.5], 1, 2, &g).is_err());
    }

    #[test]
    fn palette_is_distinct_for_small_labels() {
        let cols: Vec<[f64; 3]> = (0..32).map(palette).collect();
        for i in 0..cols.len() {
            for j in 0..i {
                let d: f64 = (0..3).map(|c| (cols[i][c] - cols[j][c]).abs()).sum();
                assert!(d > 0.02, "{i} vs {j}");
            }
        }
        assert_eq!(palette(-1), [0.0; 3]);
    }

    #[test]
    fn csv_reals_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_csv(&p, &["a", "b"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n");
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 5e-324, 1.2345678901234567e7];
        let rows: Vec<Vec<CsvValue>> = vals.iter().map(|&v| vec!["x".into(), v.into()]).collect();
        write_csv(&p, &["name", "v"], &rows).unwrap();
        let (h, back) = read_csv(&p).unwrap();
        assert_eq!(h, ["name", "v"]);
        for (r, v) in back.iter().zip(vals) {
            assert_eq!(r[1].parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert!(std::fs::read(&p).unwrap().is_ascii());
        assert!(matches!(
            write_csv(&p, &["a"], &[vec!["λ".into()]]),
            Err(IoError::NonAscii(_))
        ));
    }
}
