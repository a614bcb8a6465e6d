//! Line-oriented text format for trained models.
//!
//! ```text
//! RFMODEL 1
//! classes 0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ
//! trees <n_t>
//! fs <f_s>
//! seed <u64>
//! tc <int> ts <float> pe <float>
//! tree <i> nodes <m>
//! S <feature> <left> <right>      | L <count_0> ... <count_35>
//! checksum <crc32>
//! ```
//!
//! The checksum is the CRC-32 of the tree's header and node lines, each
//! with its trailing newline. kNN files are `KNNMODEL 1`, `k <k>`, the
//! thresholds line, then `<label> <400 bits>` per training row.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::tree::{DecisionTree, Node};
use super::{Classifier, ForestModel, KnnModel, RejectionThresholds, TrainingRow};
use crate::error::ModelFormatError;
use crate::glyph::{class_index, FeatureVector, ALPHABET, CLASS_COUNT};

const FOREST_MAGIC: &str = "RFMODEL 1";
const KNN_MAGIC: &str = "KNNMODEL 1";

fn thresholds_line(t: &RejectionThresholds) -> String {
    format!("tc {} ts {} pe {}", t.t_c, t.t_s, t.p_e)
}

fn tree_lines(i: usize, tree: &DecisionTree) -> String {
    let mut s = format!("tree {i} nodes {}\n", tree.nodes().len());
    for node in tree.nodes() {
        match node {
            Node::Split { feature, left, right } => {
                let _ = writeln!(s, "S {feature} {left} {right}");
            }
            Node::Leaf { counts } => {
                s.push('L');
                for c in counts {
                    let _ = write!(s, " {c}");
                }
                s.push('\n');
            }
        }
    }
    s
}

pub fn encode_model(model: &Classifier) -> String {
    let mut out = String::new();
    match model {
        Classifier::Forest(m) => {
            out.push_str(FOREST_MAGIC);
            out.push('\n');
            let classes: String = ALPHABET.iter().collect();
            let _ = writeln!(out, "classes {classes}");
            let _ = writeln!(out, "trees {}", m.n_t());
            let _ = writeln!(out, "fs {}", m.f_s());
            let _ = writeln!(out, "seed {}", m.seed());
            let _ = writeln!(out, "{}", thresholds_line(&m.thresholds()));
            for (i, tree) in m.trees().iter().enumerate() {
                let body = tree_lines(i, tree);
                out.push_str(&body);
                let _ = writeln!(out, "checksum {}", crc32fast::hash(body.as_bytes()));
            }
        }
        Classifier::Knn(m) => {
            out.push_str(KNN_MAGIC);
            out.push('\n');
            let _ = writeln!(out, "k {}", m.k());
            let _ = writeln!(out, "{}", thresholds_line(&m.thresholds()));
            for row in m.training() {
                let _ = writeln!(out, "{} {}", ALPHABET[row.class as usize], row.features.to_bit_string());
            }
        }
    }
    out
}

pub fn save_model(model: &Classifier, path: impl AsRef<Path>) -> Result<(), ModelFormatError> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier, ModelFormatError> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ModelFormatError::Malformed {
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    parse_model(&text)
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// Current 1-based line number (of the last line returned).
    fn number(&self) -> usize {
        self.pos
    }

    fn next(&mut self, what: &str) -> Result<&'a str, ModelFormatError> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| ModelFormatError::Truncated(format!("expected {what}")))?;
        self.pos += 1;
        Ok(line)
    }

    fn malformed(&self, reason: impl Into<String>) -> ModelFormatError {
        ModelFormatError::Malformed {
            line: self.number(),
            reason: reason.into(),
        }
    }

    /// Parses `<key> <value>`.
    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T, ModelFormatError> {
        let line = self.next(key)?;
        match line.split(' ').collect::<Vec<_>>().as_slice() {
            [k, v] if *k == key => v.parse().map_err(|_| self.malformed(format!("bad {key} value `{v}`"))),
            _ => Err(self.malformed(format!("expected `{key} <value>`, found `{line}`"))),
        }
    }

    fn thresholds(&mut self) -> Result<RejectionThresholds, ModelFormatError> {
        let line = self.next("thresholds")?;
        let t = match line.split(' ').collect::<Vec<_>>().as_slice() {
            ["tc", tc, "ts", ts, "pe", pe] => match (tc.parse(), ts.parse(), pe.parse()) {
                (Ok(t_c), Ok(t_s), Ok(p_e)) => RejectionThresholds { t_c, t_s, p_e },
                _ => return Err(self.malformed("unparsable threshold value")),
            },
            _ => return Err(self.malformed(format!("expected thresholds, found `{line}`"))),
        };
        t.validate().map_err(|e| self.malformed(e.to_string()))?;
        Ok(t)
    }

    fn finish(&self) -> Result<(), ModelFormatError> {
        if self.pos < self.lines.len() {
            return Err(ModelFormatError::Malformed {
                line: self.pos + 1,
                reason: "unexpected trailing content".into(),
            });
        }
        Ok(())
    }
}

fn parse_node(line: &str) -> Result<Node, String> {
    let mut tokens = line.split(' ');
    let kind = tokens.next();
    let nums: Result<Vec<usize>, _> = tokens.map(str::parse::<usize>).collect();
    let nums = nums.map_err(|_| format!("bad number in node `{line}`"))?;
    match (kind, nums.as_slice()) {
        (Some("S"), &[feature, left, right]) => Ok(Node::Split { feature, left, right }),
        (Some("L"), counts) if counts.len() == CLASS_COUNT => {
            let mut out = [0u32; CLASS_COUNT];
            for (o, &c) in out.iter_mut().zip(counts) {
                *o = u32::try_from(c).map_err(|_| format!("leaf count {c} too large"))?;
            }
            Ok(Node::Leaf { counts: out })
        }
        _ => Err(format!("unrecognized node `{line}`")),
    }
}

/// Parses either model kind, detected from the first line.
pub fn parse_model(text: &str) -> Result<Classifier, ModelFormatError> {
    let Some(body) = text.strip_suffix('\n') else {
        return Err(ModelFormatError::Truncated("missing final newline".into()));
    };
    let mut lines = Lines {
        lines: body.split('\n').collect(),
        pos: 0,
    };
    match lines.next("header")? {
        FOREST_MAGIC => parse_forest(&mut lines).map(Classifier::Forest),
        KNN_MAGIC => parse_knn(&mut lines).map(Classifier::Knn),
        other => Err(ModelFormatError::Version(other.to_string())),
    }
}

fn parse_forest(lines: &mut Lines<'_>) -> Result<ForestModel, ModelFormatError> {
    let classes: String = lines.keyed("classes")?;
    if classes.chars().ne(ALPHABET.iter().copied()) {
        return Err(lines.malformed(format!("unsupported class list `{classes}`")));
    }
    let n_t: usize = lines.keyed("trees")?;
    let f_s: usize = lines.keyed("fs")?;
    let seed: u64 = lines.keyed("seed")?;
    let thresholds = lines.thresholds()?;
    let mut trees = Vec::with_capacity(n_t.min(4096));
    for i in 0..n_t {
        let header = lines.next("tree header")?;
        let header_line = lines.number();
        let m = match header.split(' ').collect::<Vec<_>>().as_slice() {
            ["tree", idx, "nodes", m] if idx.parse::<usize>() == Ok(i) => {
                m.parse::<usize>().map_err(|_| lines.malformed("bad node count"))?
            }
            _ => return Err(lines.malformed(format!("expected `tree {i} nodes <m>`, found `{header}`"))),
        };
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(header.as_bytes());
        hasher.update(b"\n");
        let mut raw = Vec::with_capacity(m.min(1 << 16));
        for _ in 0..m {
            let line = lines.next("tree node")?;
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
            raw.push((lines.number(), line));
        }
        let stored: u32 = lines.keyed("checksum")?;
        let computed = hasher.finalize();
        if stored != computed {
            return Err(ModelFormatError::Checksum {
                tree: i,
                stored,
                computed,
            });
        }
        let nodes = raw
            .into_iter()
            .map(|(line, text)| parse_node(text).map_err(|reason| ModelFormatError::Malformed { line, reason }))
            .collect::<Result<Vec<_>, _>>()?;
        let tree = DecisionTree::from_nodes(nodes).map_err(|reason| ModelFormatError::Malformed {
            line: header_line,
            reason,
        })?;
        trees.push(tree);
    }
    lines.finish()?;
    ForestModel::from_parts(trees, f_s, seed, thresholds).map_err(|e| ModelFormatError::Malformed {
        line: 0,
        reason: e.to_string(),
    })
}

fn parse_knn(lines: &mut Lines<'_>) -> Result<KnnModel, ModelFormatError> {
    let k: usize = lines.keyed("k")?;
    let thresholds = lines.thresholds()?;
    let mut rows = Vec::new();
    while lines.pos < lines.lines.len() {
        let line = lines.next("sample")?;
        let row = line
            .split_once(' ')
            .and_then(|(label, bits)| {
                let mut chars = label.chars();
                let c = chars.next()?;
                if chars.next().is_some() {
                    return None;
                }
                Some(TrainingRow {
                    class: class_index(c)? as u8,
                    features: FeatureVector::from_bit_string(bits)?,
                })
            })
            .ok_or_else(|| lines.malformed("expected `<label> <400 bits>`"))?;
        rows.push(row);
    }
    KnnModel::from_rows(rows, k, thresholds).map_err(|e| ModelFormatError::Malformed {
        line: 2,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{forest_predict, knn_predict, train_forest, train_knn};
    use crate::glyph::GlyphSample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(seed: u64) -> Vec<GlyphSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ['3', 'E', 'W']
            .iter()
            .enumerate()
            .flat_map(|(k, &label)| {
                (0..6)
                    .map(|_| GlyphSample::from_fn(Some(label), |x, _| (x / 6 == k) ^ rng.random_bool(0.1)))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn forest() -> Classifier {
        let t = RejectionThresholds {
            t_c: 12,
            t_s: 33.5,
            p_e: 0.4,
        };
        Classifier::Forest(train_forest(&samples(1), 7, 20, 99, t).unwrap())
    }

    fn knn() -> Classifier {
        Classifier::Knn(train_knn(&samples(2), 3, RejectionThresholds::default()).unwrap())
    }

    #[test]
    fn forest_header_layout() {
        let text = encode_model(&forest());
        let head: Vec<&str> = text.lines().take(7).collect();
        assert_eq!(
            head,
            vec![
                "RFMODEL 1",
                "classes 0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ",
                "trees 7",
                "fs 20",
                "seed 99",
                "tc 12 ts 33.5 pe 0.4",
                head[6],
            ]
        );
        assert!(head[6].starts_with("tree 0 nodes "));
    }

    #[test]
    fn round_trips_are_byte_identical() {
        for m in [forest(), knn()] {
            let text = encode_model(&m);
            let back = parse_model(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back), text);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let m = forest();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        for s in samples(5) {
            if let (Classifier::Forest(a), Classifier::Forest(b)) = (&m, &back) {
                assert_eq!(forest_predict(a, &s), forest_predict(b, &s));
            }
        }
        let k = knn();
        save_model(&k, &path).unwrap();
        let back = load_model(&path).unwrap();
        for s in samples(6) {
            if let (Classifier::Knn(a), Classifier::Knn(b)) = (&k, &back) {
                assert_eq!(knn_predict(a, &s), knn_predict(b, &s));
            }
        }
    }

    #[test]
    fn corrupted_magic_is_version_error() {
        let text = encode_model(&forest()).replacen("RFMODEL 1", "RFMODEL 2", 1);
        assert!(matches!(parse_model(&text), Err(ModelFormatError::Version(v)) if v == "RFMODEL 2"));
        assert!(matches!(parse_model("hello\n"), Err(ModelFormatError::Version(_))));
    }

    #[test]
    fn flipped_count_is_checksum_error() {
        let text = encode_model(&forest());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let at = lines.iter().position(|l| l.starts_with("L ")).unwrap();
        lines[at] = lines[at].replacen(" 0", " 9", 1);
        let corrupted = lines.join("\n") + "\n";
        assert!(matches!(
            parse_model(&corrupted),
            Err(ModelFormatError::Checksum { tree: 0, .. })
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let text = encode_model(&forest());
        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_model(cut), Err(ModelFormatError::Truncated(_))));
        let line_cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_model(&line_cut), Err(ModelFormatError::Truncated(_))));
        assert!(matches!(parse_model(""), Err(ModelFormatError::Truncated(_))));
    }

    #[test]
    fn malformed_lines() {
        let text = encode_model(&forest()).replacen("fs 20", "fs twenty", 1);
        assert!(matches!(
            parse_model(&text),
            Err(ModelFormatError::Malformed { line: 4, .. })
        ));
        let text = encode_model(&forest()) + "extra\n";
        assert!(matches!(parse_model(&text), Err(ModelFormatError::Malformed { .. })));
        let text = encode_model(&knn()).replacen("k 3", "k 0", 1);
        assert!(matches!(parse_model(&text), Err(ModelFormatError::Malformed { .. })));
        let text = encode_model(&knn()) + "a 0101\n";
        assert!(matches!(parse_model(&text), Err(ModelFormatError::Malformed { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_model("/nonexistent/x.model"),
            Err(ModelFormatError::Io(_))
        ));
    }
}
