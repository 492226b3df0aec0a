//! Plain-text network files.
//!
//! ```text
//! N n0 n1            (two communities)
//! N k s1 s2 ... sk   (k communities)
//! e11 e12 ... e1N
//! ...
//! ```
//!
//! followed by `N` rows of `N` space-separated adjacency bits. Combination
//! matrices are written as headerless CSV with 17 significant digits.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::Network;
use crate::error::{Error, Result};

pub fn write_network<W: Write>(network: &Network, mut out: W) -> Result<()> {
    let n = network.size();
    if network.sizes.len() == 2 {
        writeln!(out, "{} {} {}", n, network.sizes[0], network.sizes[1])?;
    } else {
        write!(out, "{} {}", n, network.sizes.len())?;
        for s in &network.sizes {
            write!(out, " {s}")?;
        }
        writeln!(out)?;
    }
    for l in 0..n {
        let row: Vec<String> = (0..n)
            .map(|k| network.adjacency[(l, k)].to_string())
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_network<R: BufRead>(input: R) -> Result<Network> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#')));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty network file"))?;
    let header = parse_usizes(&header?, line_no)?;
    let sizes = parse_header(&header, line_no)?;
    let n = header[0];

    let mut adjacency = DMatrix::<u8>::zeros(n, n);
    for row in 0..n {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(line_no + row + 1, "missing adjacency row"))?;
        let bits = parse_usizes(&line?, line_no)?;
        if bits.len() != n {
            return Err(Error::parse(
                line_no,
                format!("expected {n} entries, found {}", bits.len()),
            ));
        }
        for (k, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::parse(line_no, format!("entry {b} is not a bit")));
            }
            adjacency[(row, k)] = b as u8;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(line_no, "trailing data after adjacency rows"));
    }
    Network::from_adjacency(adjacency, sizes)
}

fn parse_header(header: &[usize], line: usize) -> Result<Vec<usize>> {
    let n = *header
        .first()
        .ok_or_else(|| Error::parse(line, "header is empty"))?;
    if header.len() == 3 && header[1] + header[2] == n {
        return Ok(vec![header[1], header[2]]);
    }
    if header.len() >= 3 && header.len() == header[1] + 2 {
        let sizes = header[2..].to_vec();
        if sizes.iter().sum::<usize>() == n {
            return Ok(sizes);
        }
    }
    Err(Error::parse(
        line,
        "header must be `N n0 n1` or `N k s1 .. sk` with sizes summing to N",
    ))
}

fn parse_usizes(line: &str, line_no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|e| Error::parse(line_no, format!("`{tok}`: {e}")))
        })
        .collect()
}

pub fn write_combination_csv<W: Write>(combination: &DMatrix<f64>, mut out: W) -> Result<()> {
    for l in 0..combination.nrows() {
        let row: Vec<String> = (0..combination.ncols())
            .map(|k| format!("{:.16e}", combination[(l, k)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a headerless CSV matrix such as the one [`write_combination_csv`]
/// produces.
pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(i + 1, format!("`{tok}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(i + 1, "ragged matrix row"));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{sample_block_model, sample_sbm, BlockModel, SbmParams};

    #[test]
    fn two_block_round_trip() {
        let params = SbmParams::new(4, 3, 0.8, 0.7, 0.2, 0.1).unwrap();
        let net = sample_sbm(&params, 9, true, 100).unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("7 4 3\n"));
        let back = read_network(buf.as_slice()).unwrap();
        assert_eq!(back.adjacency, net.adjacency);
        assert_eq!(back.combination, net.combination);
        assert_eq!(back.clusters, net.clusters);
    }

    #[test]
    fn k_block_header() {
        let model = BlockModel::planted(vec![2, 3, 2], &[0.9, 0.9, 0.9], 0.3).unwrap();
        let net = sample_block_model(&model, 2, true, 100).unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("7 3 2 3 2\n"));
        let back = read_network(buf.as_slice()).unwrap();
        assert_eq!(back.sizes, vec![2, 3, 2]);
    }

    #[test]
    fn malformed_files() {
        assert!(read_network("3 1 1\n1 1 1\n1 1 1\n1 1 1\n".as_bytes()).is_err());
        assert!(read_network("2 1 1\n1 1\n".as_bytes()).is_err());
        assert!(read_network("2 1 1\n1 2\n1 1\n".as_bytes()).is_err());
        let err = read_network("2 1 1\n1 0\n1 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::ZeroColumn { agent: 1 }));
    }

    #[test]
    fn combination_csv_is_exact() {
        let params = SbmParams::new(5, 4, 0.8, 0.7, 0.2, 0.1).unwrap();
        let net = sample_sbm(&params, 4, true, 100).unwrap();
        let mut buf = Vec::new();
        write_combination_csv(&net.combination, &mut buf).unwrap();
        let back = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, net.combination);
    }
}
