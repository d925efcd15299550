use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{canonical_labels, modularity, Partition, PracticeGraph};
use crate::error::{Error, Result};

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// GraphML with `W` and `weight` on edges and, when a partition is given,
/// `community` on nodes.
pub fn write_graphml(g: &PracticeGraph, partition: Option<&Partition>, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"W\" for=\"edge\" attr.name=\"W\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    s.push_str("  <graph id=\"practice\" edgedefault=\"undirected\">\n");
    for (i, n) in g.nodes.iter().enumerate() {
        match partition {
            Some(p) => {
                let _ = writeln!(
                    s,
                    "    <node id=\"{}\"><data key=\"community\">{}</data></node>",
                    xml_escape(n),
                    p.community[i]
                );
            }
            None => {
                let _ = writeln!(s, "    <node id=\"{}\"/>", xml_escape(n));
            }
        }
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"W\">{}</data><data key=\"weight\">{}</data></edge>",
            xml_escape(&g.nodes[e.a]),
            xml_escape(&g.nodes[e.b]),
            e.uniqueness,
            e.weight
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    write_text(path, &s)
}

pub fn write_dot(g: &PracticeGraph, partition: Option<&Partition>, path: &Path) -> Result<()> {
    let mut s = String::from("graph practice {\n");
    for (i, n) in g.nodes.iter().enumerate() {
        match partition {
            Some(p) => {
                let _ = writeln!(s, "  \"{}\" [community={}];", dot_escape(n), p.community[i]);
            }
            None => {
                let _ = writeln!(s, "  \"{}\";", dot_escape(n));
            }
        }
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "  \"{}\" -- \"{}\" [W={}, weight={}];",
            dot_escape(&g.nodes[e.a]),
            dot_escape(&g.nodes[e.b]),
            e.uniqueness,
            e.weight
        );
    }
    s.push_str("}\n");
    write_text(path, &s)
}

/// `region_id,community` rows after a comment line carrying Q and the
/// resolution.
pub fn write_partition_csv(g: &PracticeGraph, p: &Partition, path: &Path) -> Result<()> {
    let q = p.modularity_q.map_or("undefined".to_string(), |q| q.to_string());
    let mut s = format!("# modularity_q={q} resolution={}\n", p.resolution);
    s.push_str("region_id,community\n");
    for (n, c) in g.nodes.iter().zip(&p.community) {
        let _ = writeln!(s, "{n},{c}");
    }
    write_text(path, &s)
}

pub fn write_partition_json(g: &PracticeGraph, p: &Partition, path: &Path) -> Result<()> {
    let communities: Vec<Vec<&str>> = p
        .members()
        .iter()
        .map(|m| m.iter().map(|i| g.nodes[*i].as_str()).collect())
        .collect();
    let doc = serde_json::json!({
        "modularity_q": p.modularity_q,
        "resolution": p.resolution,
        "communities": communities,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::json(path, e))?;
    write_text(path, &(text + "\n"))
}

/// Read a partition written by [`write_partition_csv`] back against `g`.
/// Q is recomputed from the graph rather than trusted from the header.
pub fn read_partition_csv(g: &PracticeGraph, path: &Path) -> Result<Partition> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut resolution = 1.0;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                if let Some(v) = kv.strip_prefix("resolution=") {
                    resolution = v
                        .parse()
                        .map_err(|_| Error::Invalid(format!("{}: bad resolution {v}", path.display())))?;
                }
            }
            continue;
        }
        rows.push(line);
    }
    let body = rows.join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut community = vec![usize::MAX; g.n_nodes()];
    for rec in r.deserialize::<(String, usize)>() {
        let (id, c) = rec.map_err(|e| Error::csv(path, e))?;
        community[g.index_of(&id)?] = c;
    }
    if let Some(i) = community.iter().position(|c| *c == usize::MAX) {
        return Err(Error::Invalid(format!(
            "{}: node {} has no community",
            path.display(),
            g.nodes[i]
        )));
    }
    let community = canonical_labels(&community);
    let modularity_q = match modularity(g, &community, resolution) {
        Ok(q) => Some(q),
        Err(Error::NoEdges) => None,
        Err(e) => return Err(e),
    };
    Ok(Partition {
        community,
        modularity_q,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (PracticeGraph, Partition) {
        let g = PracticeGraph::from_edges(&["a", "b", "c", "d&e"], &[("a", "b"), ("c", "d&e")]).unwrap();
        let p = Partition {
            community: vec![0, 0, 1, 1],
            modularity_q: modularity(&g, &[0, 0, 1, 1], 1.0).ok(),
            resolution: 1.0,
        };
        (g, p)
    }

    #[test]
    fn partition_csv_round_trip() {
        let (g, p) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.csv");
        write_partition_csv(&g, &p, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# modularity_q=0.5 resolution=1\nregion_id,community\na,0\n"));
        assert_eq!(read_partition_csv(&g, &path).unwrap(), p);

        let empty = PracticeGraph::from_edges::<&str>(&["x", "y"], &[]).unwrap();
        let s = Partition::singletons(2, 1.0);
        write_partition_csv(&empty, &s, &path).unwrap();
        assert!(fs::read_to_string(&path)
            .unwrap()
            .starts_with("# modularity_q=undefined"));
        assert_eq!(read_partition_csv(&empty, &path).unwrap(), s);
    }

    #[test]
    fn graph_files_carry_attributes() {
        let (g, p) = sample();
        let dir = tempfile::tempdir().unwrap();
        let gm = dir.path().join("g.graphml");
        let dot = dir.path().join("g.dot");
        write_graphml(&g, Some(&p), &gm).unwrap();
        write_dot(&g, None, &dot).unwrap();
        let x = fs::read_to_string(gm).unwrap();
        assert!(x.contains("<node id=\"d&amp;e\"><data key=\"community\">1</data></node>"));
        assert_eq!(x.matches("<edge ").count(), 2);
        let d = fs::read_to_string(dot).unwrap();
        assert!(d.contains("\"a\" -- \"b\" [W="));
    }
}
