//! CSV readers for edge lists (`src,dst[,weight]`) and adoption logs
//! (`user,app[,timestamp]`). `#` starts a comment line; an optional header
//! row whose first field is `src` or `user` is skipped.

use std::io::Read;

use super::{AdoptionMatrix, CandidateNetwork, DataError, NetworkKind, Symmetrize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub line: u64,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdoptionRecord {
    pub line: u64,
    pub user: usize,
    pub app: usize,
    pub timestamp: Option<i64>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn for_each_record<R: Read>(
    input: R,
    header: &str,
    mut f: impl FnMut(u64, &csv::StringRecord) -> Result<(), DataError>,
) -> Result<(), DataError> {
    let mut rdr = reader(input);
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => return Ok(()),
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(DataError::Malformed { line, message: e.to_string() });
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if std::mem::take(&mut first) && record.get(0).is_some_and(|h| h.eq_ignore_ascii_case(header)) {
            continue;
        }
        f(line, &record)?;
    }
}

fn field<T: std::str::FromStr>(line: u64, record: &csv::StringRecord, idx: usize, what: &str) -> Result<T, DataError> {
    let raw = record.get(idx).ok_or_else(|| DataError::Malformed { line, message: format!("missing {what}") })?;
    raw.parse().map_err(|_| DataError::Malformed { line, message: format!("invalid {what} {raw:?}") })
}

fn check_arity(line: u64, record: &csv::StringRecord, min: usize, max: usize) -> Result<(), DataError> {
    if record.len() < min || record.len() > max {
        return Err(DataError::Malformed {
            line,
            message: format!("expected {min} to {max} fields, found {}", record.len()),
        });
    }
    Ok(())
}

/// Parses edge-list records without range or symmetry checks.
pub fn parse_edge_records<R: Read>(input: R) -> Result<Vec<EdgeRecord>, DataError> {
    let mut out = Vec::new();
    for_each_record(input, "src", |line, rec| {
        check_arity(line, rec, 2, 3)?;
        let src = field(line, rec, 0, "source id")?;
        let dst = field(line, rec, 1, "target id")?;
        let weight = match rec.get(2) {
            Some(w) if !w.is_empty() => field(line, rec, 2, "weight")?,
            _ => 1.0,
        };
        out.push(EdgeRecord { line, src, dst, weight });
        Ok(())
    })?;
    Ok(out)
}

/// Parses adoption records without range or duplicate checks.
pub fn parse_adoption_records<R: Read>(input: R) -> Result<Vec<AdoptionRecord>, DataError> {
    let mut out = Vec::new();
    for_each_record(input, "user", |line, rec| {
        check_arity(line, rec, 2, 3)?;
        let user = field(line, rec, 0, "user id")?;
        let app = field(line, rec, 1, "app id")?;
        let timestamp = match rec.get(2) {
            Some(t) if !t.is_empty() => Some(field(line, rec, 2, "timestamp")?),
            _ => None,
        };
        out.push(AdoptionRecord { line, user, app, timestamp });
        Ok(())
    })?;
    Ok(out)
}

/// Reads a `src,dst[,weight]` edge list into a symmetric network. A missing
/// weight means 1.0.
pub fn load_network_edge_list<R: Read>(
    input: R,
    name: &str,
    num_users: usize,
    kind: NetworkKind,
    symmetrize: Symmetrize,
) -> Result<CandidateNetwork, DataError> {
    let records = parse_edge_records(input)?;
    CandidateNetwork::from_records(name, kind, num_users, records, symmetrize)
}

/// Reads a `user,app[,timestamp]` log. Identical duplicate lines collapse to one entry.
pub fn load_adoptions<R: Read>(input: R, num_users: usize, num_apps: usize) -> Result<AdoptionMatrix, DataError> {
    let records = parse_adoption_records(input)?;
    AdoptionMatrix::from_records(num_users, num_apps, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edge_list_examples() {
        let g = load_network_edge_list("0,1,2.0".as_bytes(), "c", 2, NetworkKind::Weighted, Symmetrize::Sum).unwrap();
        assert_eq!(g.weight(0, 1), 2.0);
        assert_eq!(g.weight(1, 0), 2.0);

        let g = load_network_edge_list("0,1,2.0\n1,0,3.0".as_bytes(), "c", 2, NetworkKind::Weighted, Symmetrize::Sum)
            .unwrap();
        assert_eq!(g.weight(0, 1), 5.0);

        let err = load_network_edge_list("0,1,-1.0".as_bytes(), "c", 2, NetworkKind::Weighted, Symmetrize::Sum);
        assert_eq!(err, Err(DataError::NegativeWeight { line: 1, weight: -1.0 }));
    }

    #[test]
    fn comments_header_and_default_weight() {
        let text = "# call log\nsrc,dst,weight\n0,1\n\n# trailing\n1,2,0.5\n";
        let g = load_network_edge_list(text.as_bytes(), "c", 3, NetworkKind::Weighted, Symmetrize::Sum).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(2, 1), 0.5);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let text = "# header comment\n0,1,1\n0,7,1\n";
        let err = load_network_edge_list(text.as_bytes(), "c", 3, NetworkKind::Weighted, Symmetrize::Sum).unwrap_err();
        assert_eq!(err, DataError::UserOutOfRange { line: 3, id: 7, num_users: 3 });
        let err = load_network_edge_list("0,1,x".as_bytes(), "c", 3, NetworkKind::Weighted, Symmetrize::Sum);
        assert!(matches!(err, Err(DataError::Malformed { line: 1, .. })));
        let err = load_network_edge_list("2,2,1".as_bytes(), "c", 3, NetworkKind::Weighted, Symmetrize::Sum);
        assert!(matches!(err, Err(DataError::SelfLoop { line: 1, user: 2 })));
    }

    #[test]
    fn adoption_examples() {
        let m = load_adoptions("3,7,1590000000".as_bytes(), 4, 8).unwrap();
        assert!(m.is_adopted(3, 7));
        assert_eq!(m.timestamp(3, 7), Some(1_590_000_000));

        let m = load_adoptions("".as_bytes(), 4, 8).unwrap();
        assert_eq!(m.num_entries(), 0);
        assert!((0..4).all(|u| (0..8).all(|a| !m.is_adopted(u, a))));

        let m = load_adoptions("1,2\n1,2\n".as_bytes(), 4, 8).unwrap();
        assert_eq!(m.num_entries(), 1);

        let err = load_adoptions("1,2,5\n1,2,6\n".as_bytes(), 4, 8).unwrap_err();
        assert!(matches!(err, DataError::ConflictingTimestamp { line: 2, .. }));
        let err = load_adoptions("user,app\n9,2\n".as_bytes(), 4, 8).unwrap_err();
        assert!(matches!(err, DataError::UserOutOfRange { line: 2, .. }));
        let err = load_adoptions("1,8".as_bytes(), 4, 8).unwrap_err();
        assert!(matches!(err, DataError::AppOutOfRange { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(
            n in 2usize..12,
            raw in proptest::collection::vec((0usize..12, 0usize..12, 0.0f64..50.0), 0..40),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(i, j, _)| i < n && j < n && i != j).collect();
            let g = CandidateNetwork::from_edges("g", NetworkKind::Weighted, n, edges, Symmetrize::Sum).unwrap();
            for i in 0..n {
                prop_assert_eq!(g.weight(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(g.weight(i, j), g.weight(j, i));
                    prop_assert!(g.weight(i, j) >= 0.0);
                }
            }
            let text = g.to_edge_list();
            let back = load_network_edge_list(text.as_bytes(), "g", n, NetworkKind::Weighted, Symmetrize::Strict).unwrap();
            prop_assert_eq!(back.to_edge_list(), text);
        }

        #[test]
        fn adoption_round_trip(
            raw in proptest::collection::vec((0usize..6, 0usize..6, proptest::option::of(0i64..1000)), 0..30),
        ) {
            // one timestamp per pair so the input is consistent
            let mut seen = std::collections::BTreeMap::new();
            for (u, a, t) in raw {
                seen.entry((u, a)).or_insert(t);
            }
            let m = AdoptionMatrix::from_entries(
                6,
                6,
                seen.iter().map(|(&(user, app), &timestamp)| crate::netdata::Adoption { user, app, timestamp }),
            )
            .unwrap();
            let back = load_adoptions(m.to_csv().as_bytes(), 6, 6).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
