//! Dataset loading: the embedded karate club, SNAP-style edge lists with a
//! separate label file, and citation datasets in `.cites`/`.content` form.
//!
//! Every loader applies the same preprocessing: node identifiers are
//! relabeled to contiguous indices in first-appearance order, directed pairs
//! are symmetrized, duplicates and self-loops dropped, and class labels
//! encoded to contiguous integers. The raw (pre-symmetrization) pair count
//! is retained because some published tables count edges that way.

mod karate;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{
    build_graph, dataset_stats, CountBasis, DatasetStats, Graph, RelabelMap, StatsConvention,
};
use crate::labels::LabelAssignment;

/// A loaded dataset: cleaned graph, identifier mapping, labels, and the
/// bookkeeping needed to reproduce published summary statistics.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub relabel: RelabelMap<String>,
    pub labels: LabelAssignment,
    pub raw_pair_count: usize,
    pub stats_convention: StatsConvention,
}

impl DatasetBundle {
    pub fn stats(&self) -> DatasetStats {
        dataset_stats(
            &self.graph,
            &self.labels,
            self.raw_pair_count,
            self.stats_convention,
        )
    }

    pub fn with_stats_convention(mut self, convention: StatsConvention) -> Self {
        self.stats_convention = convention;
        self
    }

    /// Writes the bundle as a generic edge list + label file pair.
    ///
    /// Edges are emitted in contiguous node order with original identifiers;
    /// label lines are grouped by ascending class index so that reloading
    /// re-derives the identical encoding.
    pub fn write_generic(&self, edges_path: &Path, labels_path: &Path) -> Result<()> {
        let mut ef = File::create(edges_path)?;
        for (u, v) in self.graph.undirected_edges() {
            writeln!(ef, "{} {}", self.relabel.original(u), self.relabel.original(v))?;
        }
        let mut lf = File::create(labels_path)?;
        for class in 0..self.labels.num_classes() {
            for node in 0..self.graph.num_nodes() {
                if self.labels.class_of(node) == class {
                    let token = match self.labels.class_names() {
                        Some(names) => names[class].clone(),
                        None => class.to_string(),
                    };
                    writeln!(lf, "{} {}", self.relabel.original(node), token)?;
                }
            }
        }
        Ok(())
    }
}

/// Summary-table counting conventions for the four benchmark datasets.
/// Karate tables print distinct undirected edges; Email prints the raw pair
/// count and divides it by N for the average degree; the citation tables
/// print raw pair counts but average over the deduplicated graph.
pub fn table_convention(dataset: &str) -> StatsConvention {
    match dataset {
        "email" => StatsConvention {
            edge_count: CountBasis::RawPairs,
            avg_degree: CountBasis::RawPairs,
        },
        "cora" | "pubmed" => StatsConvention {
            edge_count: CountBasis::RawPairs,
            avg_degree: CountBasis::UndirectedEdges,
        },
        _ => StatsConvention::default(),
    }
}

/// The embedded karate club dataset. Node indices are the canonical
/// published numbering, so the relabel map is the identity.
pub fn load_karate() -> DatasetBundle {
    let graph = Graph::from_undirected_edges(karate::NUM_NODES, &karate::EDGES)
        .expect("embedded karate data is valid");
    let mut relabel = RelabelMap::new();
    for i in 0..karate::NUM_NODES {
        relabel.intern(&i.to_string());
    }
    let mut ground_truth = vec![1usize; karate::NUM_NODES];
    for &m in &karate::MR_HI_MEMBERS {
        ground_truth[m] = 0;
    }
    let labels = LabelAssignment::new(
        ground_truth,
        2,
        Some(karate::CLASS_NAMES.iter().map(|s| s.to_string()).collect()),
    )
    .expect("embedded karate labels are valid");
    DatasetBundle {
        name: "karate".to_string(),
        graph,
        relabel,
        labels,
        raw_pair_count: karate::EDGES.len(),
        stats_convention: table_convention("karate"),
    }
}

struct NumberedLine {
    number: usize,
    text: String,
}

fn read_data_lines(path: &Path) -> Result<Vec<NumberedLine>> {
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: format!("cannot open: {e}"),
    })?;
    let mut lines = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push(NumberedLine {
            number: idx + 1,
            text: trimmed.to_string(),
        });
    }
    Ok(lines)
}

fn parse_node_id(token: &str, path: &Path, line: usize) -> Result<String> {
    token
        .parse::<u64>()
        .map(|v| v.to_string())
        .map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("expected an integer node id, got {token:?}"),
        })
}

/// Loads a SNAP-style dataset: one whitespace-separated node pair per line
/// (`#` comments ignored) plus a `node label` file covering every node.
pub fn load_edge_list_dataset(edges_path: &Path, labels_path: &Path) -> Result<DatasetBundle> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for line in read_data_lines(edges_path)? {
        let mut tokens = line.text.split_whitespace();
        let (Some(u), Some(v), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: edges_path.display().to_string(),
                line: line.number,
                msg: format!("expected two node ids, got {:?}", line.text),
            });
        };
        pairs.push((
            parse_node_id(u, edges_path, line.number)?,
            parse_node_id(v, edges_path, line.number)?,
        ));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let raw_pair_count = pairs.len();
    let (graph, relabel) = build_graph(&pairs)?;

    let mut node_tokens: HashMap<String, String> = HashMap::new();
    let mut token_order: Vec<String> = Vec::new();
    for line in read_data_lines(labels_path)? {
        let mut tokens = line.text.split_whitespace();
        let (Some(node), Some(label), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: labels_path.display().to_string(),
                line: line.number,
                msg: format!("expected `node label`, got {:?}", line.text),
            });
        };
        let node = parse_node_id(node, labels_path, line.number)?;
        if relabel.index_of(&node).is_none() {
            return Err(Error::LabelForUnknownNode { id: node });
        }
        if node_tokens.insert(node.clone(), label.to_string()).is_some() {
            return Err(Error::Parse {
                path: labels_path.display().to_string(),
                line: line.number,
                msg: format!("duplicate label line for node {node}"),
            });
        }
        if !token_order.iter().any(|t| t == label) {
            token_order.push(label.to_string());
        }
    }
    let mut ground_truth = Vec::with_capacity(graph.num_nodes());
    for idx in 0..graph.num_nodes() {
        let id = relabel.original(idx);
        let token = node_tokens
            .get(id)
            .ok_or_else(|| Error::MissingLabel { id: id.clone() })?;
        let class = token_order.iter().position(|t| t == token).unwrap();
        ground_truth.push(class);
    }
    let labels = LabelAssignment::new(ground_truth, token_order.len(), Some(token_order))?;
    let name = edges_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "edge-list".to_string());
    Ok(DatasetBundle {
        name,
        graph,
        relabel,
        labels,
        raw_pair_count,
        stats_convention: StatsConvention::default(),
    })
}

/// The published label encoding for the Cora citation dataset, keyed by the
/// class tokens as they appear in `cora.content`.
pub fn cora_label_encoding() -> Vec<(String, usize)> {
    [
        ("Rule_Learning", 0),
        ("Neural_Networks", 1),
        ("Theory", 2),
        ("Case_Based", 3),
        ("Probabilistic_Methods", 4),
        ("Genetic_Algorithms", 5),
        ("Reinforcement_Learning", 6),
    ]
    .iter()
    .map(|&(n, i)| (n.to_string(), i))
    .collect()
}

/// Loads a citation dataset from a `.cites` file (one `cited citing` pair
/// per line) and a `.content` file whose rows start with the paper id and
/// end with the class name. Feature columns in between are discarded.
///
/// With an explicit `label_encoding`, class indices follow it exactly;
/// otherwise classes are encoded in first-appearance (content order).
pub fn load_citation_dataset(
    cites_path: &Path,
    content_path: &Path,
    label_encoding: Option<&[(String, usize)]>,
) -> Result<DatasetBundle> {
    let mut paper_class: HashMap<String, String> = HashMap::new();
    let mut paper_order: Vec<String> = Vec::new();
    for line in read_data_lines(content_path)? {
        let tokens: Vec<&str> = line.text.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(Error::Parse {
                path: content_path.display().to_string(),
                line: line.number,
                msg: "expected at least a paper id and a class name".to_string(),
            });
        }
        let id = tokens[0].to_string();
        let class = tokens[tokens.len() - 1].to_string();
        if paper_class.insert(id.clone(), class).is_some() {
            return Err(Error::Parse {
                path: content_path.display().to_string(),
                line: line.number,
                msg: format!("duplicate paper id {id}"),
            });
        }
        paper_order.push(id);
    }

    let mut relabel: RelabelMap<String> = RelabelMap::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut raw_pair_count = 0usize;
    for line in read_data_lines(cites_path)? {
        let mut tokens = line.text.split_whitespace();
        let (Some(cited), Some(citing), None) = (tokens.next(), tokens.next(), tokens.next())
        else {
            return Err(Error::Parse {
                path: cites_path.display().to_string(),
                line: line.number,
                msg: format!("expected `cited citing`, got {:?}", line.text),
            });
        };
        for id in [cited, citing] {
            if !paper_class.contains_key(id) {
                return Err(Error::UnknownPaperId { id: id.to_string() });
            }
        }
        raw_pair_count += 1;
        let u = relabel.intern(&cited.to_string());
        let v = relabel.intern(&citing.to_string());
        pairs.push((u, v));
    }
    // Papers that are never cited and cite nothing become isolated nodes.
    for id in &paper_order {
        relabel.intern(id);
    }
    let graph = Graph::from_relabeled_pairs(relabel.len(), &pairs)?;

    let (encoding, class_names) = match label_encoding {
        Some(given) => {
            let num_classes = given.iter().map(|&(_, i)| i + 1).max().unwrap_or(0);
            let mut names = vec![String::new(); num_classes];
            let mut map = HashMap::new();
            for (name, idx) in given {
                names[*idx] = name.clone();
                map.insert(name.clone(), *idx);
            }
            (map, names)
        }
        None => {
            let mut map = HashMap::new();
            let mut names = Vec::new();
            for id in &paper_order {
                let class = &paper_class[id];
                if !map.contains_key(class) {
                    map.insert(class.clone(), names.len());
                    names.push(class.clone());
                }
            }
            (map, names)
        }
    };
    let mut ground_truth = Vec::with_capacity(graph.num_nodes());
    for idx in 0..graph.num_nodes() {
        let id = relabel.original(idx);
        let class_token = &paper_class[id];
        let class = *encoding
            .get(class_token)
            .ok_or_else(|| Error::UnknownClassName {
                name: class_token.clone(),
            })?;
        ground_truth.push(class);
    }
    let labels = LabelAssignment::new(ground_truth, class_names.len(), Some(class_names))?;
    let name = cites_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "citation".to_string());
    Ok(DatasetBundle {
        name,
        graph,
        relabel,
        labels,
        raw_pair_count,
        stats_convention: table_convention("cora"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn karate_counts_match_the_published_table() {
        let bundle = load_karate();
        assert_eq!(bundle.graph.num_nodes(), 34);
        assert_eq!(bundle.graph.num_undirected_edges(), 78);
        assert_eq!(bundle.labels.num_classes(), 2);
        assert_eq!(crate::graph::degrees(&bundle.graph).sum(), 156);
    }

    #[test]
    fn karate_instructors_carry_the_two_classes() {
        let bundle = load_karate();
        assert_eq!(bundle.labels.class_of(0), 0);
        assert_eq!(bundle.labels.class_of(33), 1);
    }

    #[test]
    fn karate_average_degree_and_clustering() {
        let bundle = load_karate();
        let stats = bundle.stats();
        assert_abs_diff_eq!(stats.avg_degree, 2.0 * 78.0 / 34.0, epsilon = 1e-12);
        assert!((stats.avg_degree - 4.59).abs() < 0.01);
        assert!((stats.avg_clustering_coefficient - 0.57).abs() < 0.01);
    }

    #[test]
    fn edge_list_loader_encodes_labels_in_first_appearance_order() {
        let edges = write_temp("0 1\n1 2\n");
        let labels = write_temp("0 5\n1 5\n2 9\n");
        let bundle = load_edge_list_dataset(edges.path(), labels.path()).unwrap();
        assert_eq!(bundle.graph.num_nodes(), 3);
        assert_eq!(bundle.labels.num_classes(), 2);
        assert_eq!(bundle.labels.ground_truth(), &[0, 0, 1]);
        assert_eq!(bundle.labels.class_names().unwrap(), &["5", "9"]);
    }

    #[test]
    fn edge_list_loader_collapses_reversed_duplicates() {
        let edges = write_temp("0 1\n1 0\n0 1\n1 2\n");
        let labels = write_temp("0 0\n1 0\n2 1\n");
        let bundle = load_edge_list_dataset(edges.path(), labels.path()).unwrap();
        assert_eq!(bundle.graph.num_undirected_edges(), 2);
        assert_eq!(bundle.raw_pair_count, 4);
    }

    #[test]
    fn edge_list_loader_ignores_comment_lines() {
        let edges = write_temp("# SNAP header\n0 1\n");
        let labels = write_temp("0 a\n1 b\n");
        let bundle = load_edge_list_dataset(edges.path(), labels.path()).unwrap();
        assert_eq!(bundle.graph.num_nodes(), 2);
        assert_eq!(bundle.raw_pair_count, 1);
    }

    #[test]
    fn edge_list_loader_rejects_label_for_unknown_node() {
        let edges = write_temp("0 1\n");
        let labels = write_temp("0 a\n1 a\n7 b\n");
        let err = load_edge_list_dataset(edges.path(), labels.path()).unwrap_err();
        assert!(matches!(err, Error::LabelForUnknownNode { id } if id == "7"));
    }

    #[test]
    fn edge_list_loader_rejects_missing_label() {
        let edges = write_temp("0 1\n1 2\n");
        let labels = write_temp("0 a\n1 b\n");
        let err = load_edge_list_dataset(edges.path(), labels.path()).unwrap_err();
        assert!(matches!(err, Error::MissingLabel { id } if id == "2"));
    }

    #[test]
    fn edge_list_loader_reports_malformed_line_number() {
        let edges = write_temp("0 1\nnot-an-id 2\n");
        let labels = write_temp("0 a\n1 a\n2 b\n");
        let err = load_edge_list_dataset(edges.path(), labels.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn citation_loader_discards_features_and_applies_explicit_encoding() {
        let content = write_temp(
            "31336 0 1 0 Neural_Networks\n\
             1061127 1 0 0 Rule_Learning\n\
             1106406 0 0 1 Theory\n",
        );
        let cites = write_temp("31336 1061127\n31336 1106406\n");
        let encoding: Vec<(String, usize)> = vec![
            ("Rule_Learning".to_string(), 0),
            ("Neural_Networks".to_string(), 1),
            ("Theory".to_string(), 2),
        ];
        let bundle =
            load_citation_dataset(cites.path(), content.path(), Some(&encoding)).unwrap();
        assert_eq!(bundle.graph.num_nodes(), 3);
        assert_eq!(bundle.graph.num_undirected_edges(), 2);
        // 31336 interned first; its class follows the explicit map.
        assert_eq!(bundle.relabel.index_of(&"31336".to_string()), Some(0));
        assert_eq!(bundle.labels.class_of(0), 1);
        assert_eq!(bundle.labels.class_names().unwrap()[0], "Rule_Learning");
    }

    #[test]
    fn citation_loader_keeps_isolated_content_papers() {
        let content = write_temp("1 x A\n2 x A\n3 x B\n");
        let cites = write_temp("1 2\n");
        let bundle = load_citation_dataset(cites.path(), content.path(), None).unwrap();
        assert_eq!(bundle.graph.num_nodes(), 3);
        assert_eq!(bundle.graph.degree(2), 0);
    }

    #[test]
    fn citation_loader_rejects_unknown_paper_in_cites() {
        let content = write_temp("1 x A\n2 x B\n");
        let cites = write_temp("1 999\n");
        let err = load_citation_dataset(cites.path(), content.path(), None).unwrap_err();
        assert!(matches!(err, Error::UnknownPaperId { id } if id == "999"));
    }

    #[test]
    fn citation_loader_rejects_class_missing_from_explicit_encoding() {
        let content = write_temp("1 x A\n2 x Mystery\n");
        let cites = write_temp("1 2\n");
        let encoding = vec![("A".to_string(), 0)];
        let err =
            load_citation_dataset(cites.path(), content.path(), Some(&encoding)).unwrap_err();
        assert!(matches!(err, Error::UnknownClassName { name } if name == "Mystery"));
    }

    #[test]
    fn cora_encoding_matches_the_published_assignment() {
        let enc = cora_label_encoding();
        let get = |name: &str| enc.iter().find(|(n, _)| n == name).unwrap().1;
        assert_eq!(get("Rule_Learning"), 0);
        assert_eq!(get("Genetic_Algorithms"), 5);
        assert_eq!(get("Reinforcement_Learning"), 6);
        assert_eq!(enc.len(), 7);
    }

    #[test]
    fn generic_round_trip_reproduces_graph_and_labels() {
        let bundle = load_karate();
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("karate.edges");
        let labels = dir.path().join("karate.labels");
        let renamed = {
            // Class names with spaces don't survive a whitespace-split label
            // file; rename for the round trip.
            let mut b = bundle.clone();
            b.labels = LabelAssignment::new(
                b.labels.ground_truth().to_vec(),
                2,
                Some(vec!["hi".to_string(), "officer".to_string()]),
            )
            .unwrap();
            b
        };
        renamed.write_generic(&edges, &labels).unwrap();
        let reloaded = load_edge_list_dataset(&edges, &labels).unwrap();
        assert_eq!(reloaded.graph, renamed.graph);
        assert_eq!(reloaded.labels, renamed.labels);
    }
}
