//! JSON file formats.
//!
//! Elements are written as `[c0, c1]` where each coordinate is the list of
//! base-`p` digits of an `F_q` element (one digit for prime `q`).
//!
//! * matrix file: `{"params", "field", "H", "C"}`
//! * packet trace (JSON lines): `{"t", "erased", "payload"}`, payload
//!   `null` when erased
//! * message file (JSON lines): `{"t", "payload"}`
//! * decoded output (JSON lines): `{"t", "emitted_at", "payload"}`

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::construct::{block_map, CodeParams, ParityCheck, SuperregularC};
use crate::error::{Error, Result};
use crate::gf::{Elem, ElemRepr, Field, FieldCtx, FieldSpec};
use crate::linalg::Matrix;
use crate::stream::{Arrival, Emission, Packet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub params: CodeParams,
    pub field: FieldSpec,
    #[serde(rename = "H")]
    pub h: Vec<Vec<ElemRepr>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<ElemRepr>>,
}

fn matrix_repr(m: &Matrix) -> Vec<Vec<ElemRepr>> {
    let f = m.field();
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|&x| f.to_repr(x)).collect())
        .collect()
}

fn matrix_from_repr(
    field: &Field,
    rows: &[Vec<ElemRepr>],
    shape: (usize, usize),
    name: &str,
) -> Result<Matrix> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::Format(format!(
            "{name} must be {} x {}",
            shape.0, shape.1
        )));
    }
    let elems = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|x| field.from_repr(x))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Format(format!("{name} row {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(field, elems)
}

impl MatrixFile {
    pub fn from_parity_check(pc: &ParityCheck) -> MatrixFile {
        MatrixFile {
            params: pc.params,
            field: pc.field().spec(),
            h: matrix_repr(&pc.h),
            c: matrix_repr(&pc.c.c),
        }
    }

    /// Rebuilds the parity check as stored. `H` is not compared against
    /// the construction, so hand-edited matrices load and can be verified.
    pub fn to_parity_check(&self) -> Result<ParityCheck> {
        let params = self.params;
        params
            .validate()
            .map_err(|e| Error::Format(format!("params: {e}")))?;
        let field =
            FieldCtx::from_spec(&self.field).map_err(|e| Error::Format(format!("field: {e}")))?;
        if field.q() as u64 != params.q {
            return Err(Error::Format(format!(
                "field has q = {}, params say q = {}",
                field.q(),
                params.q
            )));
        }
        let h = matrix_from_repr(&field, &self.h, (params.b, params.n()), "H")?;
        let c = matrix_from_repr(&field, &self.c, (params.a, params.tau + 1 - params.a), "C")?;
        Ok(ParityCheck {
            params,
            h,
            c: SuperregularC { c },
            block_map: block_map(&params),
        })
    }
}

pub fn write_matrix_file(pc: &ParityCheck, w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(w, &MatrixFile::from_parity_check(pc))
        .map_err(|e| Error::Io(e.to_string()))
}

pub fn read_matrix_file(r: impl std::io::Read) -> Result<ParityCheck> {
    let file: MatrixFile =
        serde_json::from_reader(r).map_err(|e| Error::Format(format!("matrix file: {e}")))?;
    file.to_parity_check()
}

/// Parses one JSON value per non-blank line; errors carry the 1-based line
/// number.
pub fn read_jsonl<T: DeserializeOwned>(r: impl BufRead) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        out.push((i + 1, v));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(
    mut w: impl Write,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(&item).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketLine {
    pub t: u64,
    pub erased: bool,
    pub payload: Option<Vec<ElemRepr>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLine {
    pub t: u64,
    pub payload: Vec<ElemRepr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedLine {
    pub t: u64,
    pub emitted_at: u64,
    pub payload: Vec<ElemRepr>,
}

fn payload_repr(field: &Field, xs: &[Elem]) -> Vec<ElemRepr> {
    xs.iter().map(|&x| field.to_repr(x)).collect()
}

fn parse_payload(field: &Field, line: usize, xs: &[ElemRepr], len: usize) -> Result<Vec<Elem>> {
    if xs.len() != len {
        return Err(Error::Format(format!(
            "line {line}: payload has {} symbols, expected {len}",
            xs.len()
        )));
    }
    xs.iter()
        .map(|x| {
            field
                .from_repr(x)
                .map_err(|e| Error::Format(format!("line {line}: {e}")))
        })
        .collect()
}

fn check_time(line: usize, expected: u64, got: u64) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "line {line}: expected t = {expected}, found t = {got}"
        )))
    }
}

pub fn arrival_line(field: &Field, a: &Arrival) -> PacketLine {
    match a {
        Arrival::Received(p) => PacketLine {
            t: p.t,
            erased: false,
            payload: Some(payload_repr(field, &p.payload)),
        },
        Arrival::Erased(t) => PacketLine {
            t: *t,
            erased: true,
            payload: None,
        },
    }
}

/// Reads a packet trace of coded packets of length `n`, numbered from 0.
pub fn read_packet_trace(field: &Field, n: usize, r: impl BufRead) -> Result<Vec<Arrival>> {
    read_jsonl::<PacketLine>(r)?
        .into_iter()
        .enumerate()
        .map(|(i, (line, p))| {
            check_time(line, i as u64, p.t)?;
            match (p.erased, p.payload) {
                (true, None) => Ok(Arrival::Erased(p.t)),
                (false, Some(xs)) => Ok(Arrival::Received(Packet {
                    t: p.t,
                    payload: parse_payload(field, line, &xs, n)?,
                })),
                (true, Some(_)) => Err(Error::Format(format!(
                    "line {line}: erased packet carries a payload"
                ))),
                (false, None) => Err(Error::Format(format!(
                    "line {line}: received packet has no payload"
                ))),
            }
        })
        .collect()
}

pub fn write_packet_trace(field: &Field, w: impl Write, arrivals: &[Arrival]) -> Result<()> {
    write_jsonl(w, arrivals.iter().map(|a| arrival_line(field, a)))
}

/// Reads message packets of length `k`, numbered from 0.
pub fn read_messages(field: &Field, k: usize, r: impl BufRead) -> Result<Vec<Vec<Elem>>> {
    read_jsonl::<MessageLine>(r)?
        .into_iter()
        .enumerate()
        .map(|(i, (line, m))| {
            check_time(line, i as u64, m.t)?;
            parse_payload(field, line, &m.payload, k)
        })
        .collect()
}

pub fn write_messages(field: &Field, w: impl Write, msgs: &[Vec<Elem>]) -> Result<()> {
    write_jsonl(
        w,
        msgs.iter().enumerate().map(|(t, m)| MessageLine {
            t: t as u64,
            payload: payload_repr(field, m),
        }),
    )
}

pub fn write_emissions(field: &Field, w: impl Write, emissions: &[Emission]) -> Result<()> {
    write_jsonl(
        w,
        emissions.iter().map(|e| DecodedLine {
            t: e.t,
            emitted_at: e.emitted_at,
            payload: payload_repr(field, &e.payload),
        }),
    )
}

pub fn read_emissions(field: &Field, k: usize, r: impl BufRead) -> Result<Vec<Emission>> {
    read_jsonl::<DecodedLine>(r)?
        .into_iter()
        .map(|(line, d)| {
            if d.emitted_at < d.t {
                return Err(Error::Format(format!(
                    "line {line}: emitted before its time"
                )));
            }
            Ok(Emission {
                t: d.t,
                emitted_at: d.emitted_at,
                payload: parse_payload(field, line, &d.payload, k)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::gf::make_field;
    use crate::scalar::ScalarCode;
    use crate::stream::StreamEncoder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn matrix_file_round_trip() {
        for (a, b, tau) in [(2, 5, 12), (3, 6, 8), (1, 1, 1), (2, 4, 9)] {
            let pc = construct(&CodeParams::new(a, b, tau).unwrap()).unwrap();
            let mut buf = Vec::new();
            write_matrix_file(&pc, &mut buf).unwrap();
            let back = read_matrix_file(buf.as_slice()).unwrap();
            assert_eq!(back, pc);
            let mut again = Vec::new();
            write_matrix_file(&back, &mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn matrix_file_rejects_bad_shapes() {
        let pc = construct(&CodeParams::new(2, 3, 4).unwrap()).unwrap();
        let mut file = MatrixFile::from_parity_check(&pc);
        file.h.pop();
        assert!(matches!(file.to_parity_check(), Err(Error::Format(_))));
        let mut file = MatrixFile::from_parity_check(&pc);
        file.params.q = 7;
        assert!(file.to_parity_check().is_err());
        assert!(read_matrix_file("{".as_bytes()).is_err());
    }

    #[test]
    fn element_layout() {
        let f = make_field(13).unwrap();
        let pc = construct(&CodeParams::new(1, 1, 2).unwrap()).unwrap();
        let json = serde_json::to_value(MatrixFile::from_parity_check(&pc)).unwrap();
        assert_eq!(json["H"][0][0], serde_json::json!([[1], [0]]));
        let line = arrival_line(
            &f,
            &Arrival::Received(Packet {
                t: 0,
                payload: vec![f.alpha()],
            }),
        );
        assert_eq!(
            serde_json::to_string(&line).unwrap(),
            r#"{"t":0,"erased":false,"payload":[[[0],[1]]]}"#
        );
        assert_eq!(
            serde_json::to_string(&arrival_line(&f, &Arrival::Erased(4))).unwrap(),
            r#"{"t":4,"erased":true,"payload":null}"#
        );
    }

    #[test]
    fn packet_trace_round_trip() {
        let pc = construct(&CodeParams::new(2, 3, 4).unwrap()).unwrap();
        let code = Arc::new(ScalarCode::new(pc).unwrap());
        let f = code.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut enc = StreamEncoder::new(code.clone());
        let arrivals: Vec<Arrival> = (0..20u64)
            .map(|t| {
                let m: Vec<Elem> = (0..code.params().k()).map(|_| f.random(&mut rng)).collect();
                let p = enc.encode(t, &m).unwrap();
                if t % 7 == 3 {
                    Arrival::Erased(t)
                } else {
                    Arrival::Received(p)
                }
            })
            .collect();
        let mut buf = Vec::new();
        write_packet_trace(&f, &mut buf, &arrivals).unwrap();
        let back = read_packet_trace(&f, code.params().n(), buf.as_slice()).unwrap();
        assert_eq!(back, arrivals);
    }

    #[test]
    fn errors_name_the_line() {
        let f = make_field(5).unwrap();
        let text =
            "{\"t\":0,\"payload\":[[[1],[0]]]}\n\n{\"t\":1,\"payload\":[[[1],[0]],[[2],[0]]]}\n";
        let err = read_messages(&f, 1, text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read_messages(&f, 1, "{\"t\":0,\"payload\":[[[9],[0]]]}".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = read_packet_trace(
            &f,
            1,
            "{\"t\":0,\"erased\":false,\"payload\":null}".as_bytes(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = read_messages(&f, 1, "{\"t\":1,\"payload\":[[[1],[0]]]}".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("expected t = 0"), "{err}");
        assert!(read_messages(&f, 1, "".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn message_and_emission_round_trip() {
        let f = make_field(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let msgs: Vec<Vec<Elem>> = (0..6)
            .map(|_| (0..3).map(|_| f.random(&mut rng)).collect())
            .collect();
        let mut buf = Vec::new();
        write_messages(&f, &mut buf, &msgs).unwrap();
        assert_eq!(read_messages(&f, 3, buf.as_slice()).unwrap(), msgs);
        let em: Vec<Emission> = msgs
            .iter()
            .enumerate()
            .map(|(t, m)| Emission {
                t: t as u64,
                emitted_at: t as u64 + 2,
                payload: m.clone(),
            })
            .collect();
        let mut buf = Vec::new();
        write_emissions(&f, &mut buf, &em).unwrap();
        assert_eq!(read_emissions(&f, 3, buf.as_slice()).unwrap(), em);
    }
}
