//! File formats: operators as coordinate-list text or dense little-endian
//! binary with a JSON header line, symbols and points as JSON.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::berezin::PointTuple;
use crate::error::{Error, Result};
use crate::fock::TruncationSpec;
use crate::scalar::{cplx, to_f64, CMatrix, Real, C};
use crate::toeplitz::Symbol;
use crate::words::MultiWord;

/// Basis order written into operator headers.
pub const BASIS_ORDER: &str =
    "coefficient-major; basis by degree vector (lex), then component words (graded lex)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorFormat {
    Coo,
    DenseF64le,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub format: OperatorFormat,
    pub spec: TruncationSpec,
    pub basis_order: String,
    pub rows: usize,
    pub cols: usize,
}

impl OperatorHeader {
    fn new(format: OperatorFormat, spec: &TruncationSpec, rows: usize, cols: usize) -> Self {
        OperatorHeader { format, spec: spec.clone(), basis_order: BASIS_ORDER.to_string(), rows, cols }
    }
}

/// `# {header}` then one `row col re im` line per nonzero entry.
pub fn write_coo<T: Real, W: Write>(out: &mut W, spec: &TruncationSpec, m: &CMatrix<T>) -> Result<()> {
    let header = OperatorHeader::new(OperatorFormat::Coo, spec, m.nrows(), m.ncols());
    writeln!(out, "# {}", serde_json::to_string(&header)?)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.re != T::zero() || z.im != T::zero() {
                writeln!(out, "{r} {c} {} {}", to_f64(z.re), to_f64(z.im))?;
            }
        }
    }
    Ok(())
}

/// Header line, then `rows · cols` pairs of little-endian `f64`, row-major.
pub fn write_dense<T: Real, W: Write>(out: &mut W, spec: &TruncationSpec, m: &CMatrix<T>) -> Result<()> {
    let header = OperatorHeader::new(OperatorFormat::DenseF64le, spec, m.nrows(), m.ncols());
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    let mut buf = Vec::with_capacity(m.nrows() * m.ncols() * 16);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            buf.extend_from_slice(&to_f64(z.re).to_le_bytes());
            buf.extend_from_slice(&to_f64(z.im).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("malformed entry on line {line}")))
}

/// Reads either operator format, detected from the header.
pub fn read_operator<T: Real, R: Read>(input: R) -> Result<(OperatorHeader, CMatrix<T>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first.trim_start_matches('#').trim();
    let header: OperatorHeader = serde_json::from_str(json)?;
    header.spec.validate()?;
    let mut m = CMatrix::zeros(header.rows, header.cols);
    match header.format {
        OperatorFormat::Coo => {
            for (no, line) in reader.lines().enumerate() {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut toks = line.split_whitespace();
                let r: usize = parse_num(toks.next(), no + 2)?;
                let c: usize = parse_num(toks.next(), no + 2)?;
                let re: f64 = parse_num(toks.next(), no + 2)?;
                let im: f64 = parse_num(toks.next(), no + 2)?;
                if r >= header.rows || c >= header.cols {
                    return Err(Error::Parse(format!("entry ({r}, {c}) outside {}x{}", header.rows, header.cols)));
                }
                m[(r, c)] = cplx(T::from_f64(re).unwrap(), T::from_f64(im).unwrap());
            }
        }
        OperatorFormat::DenseF64le => {
            let mut bytes = Vec::new();
            reader.read_to_end(&mut bytes)?;
            let expected = header.rows * header.cols * 16;
            if bytes.len() != expected {
                return Err(Error::Parse(format!("expected {expected} payload bytes, found {}", bytes.len())));
            }
            let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            for r in 0..header.rows {
                for c in 0..header.cols {
                    let at = (r * header.cols + c) * 16;
                    m[(r, c)] = cplx(T::from_f64(f(at)).unwrap(), T::from_f64(f(at + 8)).unwrap());
                }
            }
        }
    }
    Ok((header, m))
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> JsonMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [to_f64(m[(r, c)].re), to_f64(m[(r, c)].im)]).collect())
        .collect()
}

fn matrix_from_json<T: Real>(rows: &JsonMatrix) -> Result<CMatrix<T>> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Ok(CMatrix::from_fn(n, cols, |r, c| {
        let [re, im] = rows[r][c];
        C::new(T::from_f64(re).unwrap(), T::from_f64(im).unwrap())
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SymbolEntry {
    alpha: Vec<String>,
    beta: Vec<String>,
    #[serde(rename = "A")]
    a: JsonMatrix,
}

fn components(w: &MultiWord) -> Vec<String> {
    w.components().iter().map(|c| c.to_string()).collect()
}

/// `[{"alpha": ["1", ""], "beta": ["", "2"], "A": [[[re, im], …]]}, …]`.
pub fn symbol_to_json<T: Real>(s: &Symbol<T>) -> Result<String> {
    let entries: Vec<SymbolEntry> = s
        .iter()
        .map(|((a, b), m)| SymbolEntry { alpha: components(a), beta: components(b), a: matrix_to_json(m) })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

pub fn symbol_from_json<T: Real>(spec: &TruncationSpec, json: &str) -> Result<Symbol<T>> {
    let entries: Vec<SymbolEntry> = serde_json::from_str(json)?;
    let mut s = Symbol::new(spec);
    for e in entries {
        let alpha = MultiWord::parse(&spec.n, &e.alpha.join("/"))?;
        let beta = MultiWord::parse(&spec.n, &e.beta.join("/"))?;
        s.insert(alpha, beta, matrix_from_json(&e.a)?)?;
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PointFile {
    dim: usize,
    #[serde(default)]
    pure: bool,
    factors: Vec<Vec<JsonMatrix>>,
}

/// `{"dim": dH, "pure": bool, "factors": [[X_{1,1}, …], …]}` with row-major
/// `[re, im]` matrices.
pub fn point_to_json<T: Real>(x: &PointTuple<T>) -> Result<String> {
    let file = PointFile {
        dim: x.dim(),
        pure: x.is_flagged_pure(),
        factors: x.factors().iter().map(|f| f.iter().map(matrix_to_json).collect()).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn point_from_json<T: Real>(json: &str) -> Result<PointTuple<T>> {
    let file: PointFile = serde_json::from_str(json)?;
    let factors = file
        .factors
        .iter()
        .map(|f| f.iter().map(matrix_from_json).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    PointTuple::new(file.dim, factors, file.pure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::GuardBand;
    use crate::random::{random_dense, random_pure_point, random_symbol, rng};

    fn spec() -> TruncationSpec {
        TruncationSpec::new(vec![2, 1], vec![2, 1], vec![2, 2], 2).unwrap()
    }

    #[test]
    fn operator_formats_round_trip() {
        let s = spec();
        let m: CMatrix<f64> = random_dense(&s, &mut rng(4));
        let mut coo = Vec::new();
        write_coo(&mut coo, &s, &m).unwrap();
        let (h, back) = read_operator::<f64, _>(coo.as_slice()).unwrap();
        assert_eq!(h.format, OperatorFormat::Coo);
        assert_eq!(h.spec, s);
        assert_eq!(back, m);
        let mut dense = Vec::new();
        write_dense(&mut dense, &s, &m).unwrap();
        let (h, back) = read_operator::<f64, _>(dense.as_slice()).unwrap();
        assert_eq!(h.format, OperatorFormat::DenseF64le);
        assert_eq!(back, m);
        assert!(read_operator::<f64, _>(&dense[..dense.len() - 3]).is_err());
    }

    #[test]
    fn symbol_and_point_round_trip() {
        let s = spec();
        let sym: Symbol<f64> = random_symbol(&s, &GuardBand::orders(&s), &mut rng(5)).unwrap();
        let back: Symbol<f64> = symbol_from_json(&s, &symbol_to_json(&sym).unwrap()).unwrap();
        assert_eq!(back, sym);
        let json = r#"[{"alpha":["1",""],"beta":["","1"],"A":[[[1,0],[0,0]],[[0,0],[1,0]]]}]"#;
        let parsed: Symbol<f64> = symbol_from_json(&s, json).unwrap();
        assert_eq!(parsed.len(), 1);
        let bad = r#"[{"alpha":["1",""],"beta":["2",""],"A":[[[1,0],[0,0]],[[0,0],[1,0]]]}]"#;
        assert!(symbol_from_json::<f64>(&s, bad).is_err());

        let x: PointTuple<f64> = random_pure_point(&s, 2, 0.1, 0.25, &mut rng(6)).unwrap();
        let back: PointTuple<f64> = point_from_json(&point_to_json(&x).unwrap()).unwrap();
        assert_eq!(back, x);
    }
}
