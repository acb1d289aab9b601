use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{MetricError, MetricScore};
use crate::table::{parse_raw, sanitize_html, SectionKind, TableError};
use crate::text::collapse_whitespace;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeLabel {
    pub tag: &'static str,
    pub colspan: usize,
    pub rowspan: usize,
    /// Cell text (whitespace-collapsed); empty for non-`td` nodes.
    pub text: String,
}

impl NodeLabel {
    pub fn element(tag: &'static str) -> Self {
        NodeLabel { tag, colspan: 1, rowspan: 1, text: String::new() }
    }

    pub fn td(text: &str, colspan: usize, rowspan: usize) -> Self {
        NodeLabel { tag: "td", colspan, rowspan, text: collapse_whitespace(text) }
    }
}

/// Ordered tree stored in preorder; `children[i]` lists child indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableTree {
    pub labels: Vec<NodeLabel>,
    pub children: Vec<Vec<usize>>,
}

impl TableTree {
    pub fn leaf(label: NodeLabel) -> Self {
        TableTree { labels: vec![label], children: vec![vec![]] }
    }

    /// Appends `label` under `parent` and returns its index.
    pub fn push(&mut self, parent: usize, label: NodeLabel) -> usize {
        let id = self.labels.len();
        self.labels.push(label);
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// DOM tree of a table: table → thead/tbody → tr → td. Input that holds
    /// no table gives `NoTableFound`.
    pub fn from_html(html: &str) -> Result<TableTree, TableError> {
        let raw = parse_raw(&sanitize_html(html)?)?;
        let mut tree = TableTree::leaf(NodeLabel::element("table"));
        for section in &raw.sections {
            let parent = match section.kind {
                SectionKind::Thead => tree.push(0, NodeLabel::element("thead")),
                SectionKind::Tbody => tree.push(0, NodeLabel::element("tbody")),
                SectionKind::Bare => 0,
            };
            for row in &section.rows {
                let tr = tree.push(parent, NodeLabel::element("tr"));
                for cell in row {
                    tree.push(tr, NodeLabel::td(&cell.text, cell.colspan, cell.rowspan));
                }
            }
        }
        Ok(tree)
    }

    /// Preorder node indices in postorder.
    fn postorder(&self) -> Vec<usize> {
        fn walk(t: &TableTree, n: usize, out: &mut Vec<usize>) {
            for &c in &t.children[n] {
                walk(t, c, out);
            }
            out.push(n);
        }
        let mut out = Vec::with_capacity(self.len());
        if !self.is_empty() {
            walk(self, 0, &mut out);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostModel {
    /// Tags and spans only.
    Structure,
    /// Tags, spans and normalized text distance on matching cells.
    Content,
}

/// Levenshtein distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.chars().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Substitution cost between two node labels.
pub fn rename_cost(a: &NodeLabel, b: &NodeLabel, model: CostModel) -> BigRational {
    if a.tag != b.tag || a.colspan != b.colspan || a.rowspan != b.rowspan {
        return BigRational::one();
    }
    if model == CostModel::Structure || a.tag != "td" {
        return BigRational::zero();
    }
    let longest = a.text.chars().count().max(b.text.chars().count());
    if longest == 0 {
        return BigRational::zero();
    }
    BigRational::new(BigInt::from(levenshtein(&a.text, &b.text)), BigInt::from(longest))
}

struct Postorder<'a> {
    labels: Vec<&'a NodeLabel>,
    /// Leftmost leaf descendant of each node, 1-based postorder numbering.
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(t: &'a TableTree) -> Self {
        let order = t.postorder();
        let mut post_of = vec![0; t.len()];
        for (k, &n) in order.iter().enumerate() {
            post_of[n] = k + 1;
        }
        let mut labels = vec![];
        let mut lld = vec![0; order.len() + 1];
        for (k, &n) in order.iter().enumerate() {
            labels.push(&t.labels[n]);
            let mut leaf = n;
            while let Some(&first) = t.children[leaf].first() {
                leaf = first;
            }
            lld[k + 1] = post_of[leaf];
        }
        let n = order.len();
        let keyroots = (1..=n).filter(|&i| !(i + 1..=n).any(|j| lld[j] == lld[i])).collect();
        Postorder { labels, lld, keyroots }
    }

    fn label(&self, i: usize) -> &NodeLabel {
        self.labels[i - 1]
    }
}

/// Ordered tree edit distance (Zhang–Shasha) with unit insert/delete costs.
pub fn tree_edit_distance(a: &TableTree, b: &TableTree, model: CostModel) -> BigRational {
    let (pa, pb) = (Postorder::new(a), Postorder::new(b));
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return BigRational::from_integer(BigInt::from(n + m));
    }
    let one = BigRational::one();
    let mut td = vec![vec![BigRational::zero(); m + 1]; n + 1];
    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.lld[i], pb.lld[j]);
            // fd[x][y] holds the forest distance for postorder nodes li-1+x and lj-1+y.
            let (rows, cols) = (i - li + 2, j - lj + 2);
            let mut fd = vec![vec![BigRational::zero(); cols]; rows];
            for x in 1..rows {
                fd[x][0] = &fd[x - 1][0] + &one;
            }
            for y in 1..cols {
                fd[0][y] = &fd[0][y - 1] + &one;
            }
            for x in 1..rows {
                for y in 1..cols {
                    let (i1, j1) = (li + x - 1, lj + y - 1);
                    let del = &fd[x - 1][y] + &one;
                    let ins = &fd[x][y - 1] + &one;
                    let best = if del < ins { del } else { ins };
                    if pa.lld[i1] == li && pb.lld[j1] == lj {
                        let sub = &fd[x - 1][y - 1] + rename_cost(pa.label(i1), pb.label(j1), model);
                        let v = if sub < best { sub } else { best };
                        td[i1][j1] = v.clone();
                        fd[x][y] = v;
                    } else {
                        let (px, py) = (pa.lld[i1] - li, pb.lld[j1] - lj);
                        let sub = &fd[px][py] + &td[i1][j1];
                        fd[x][y] = if sub < best { sub } else { best };
                    }
                }
            }
        }
    }
    td[n][m].clone()
}

/// `1 - distance / max(|pred|, |gt|)` as an exact rational.
pub fn teds_trees_exact(pred: &TableTree, gt: &TableTree, model: CostModel) -> BigRational {
    let denom = pred.len().max(gt.len());
    if denom == 0 {
        return BigRational::one();
    }
    let d = tree_edit_distance(pred, gt, model);
    let v = BigRational::one() - d / BigRational::from_integer(BigInt::from(denom));
    if v < BigRational::zero() {
        BigRational::zero()
    } else {
        v
    }
}

/// TEDS (or S-TEDS with `structure_only`) between two HTML strings.
/// A prediction without a table scores as a bare `<table>` node.
pub fn teds(pred_html: &str, gt_html: &str, structure_only: bool) -> Result<MetricScore, MetricError> {
    let gt = TableTree::from_html(gt_html).map_err(|_| MetricError::EmptyGroundTruth)?;
    let pred = TableTree::from_html(pred_html).unwrap_or_else(|_| TableTree::leaf(NodeLabel::element("table")));
    let model = if structure_only { CostModel::Structure } else { CostModel::Content };
    let v = teds_trees_exact(&pred, &gt, model);
    Ok(MetricScore::value(v.to_f64().unwrap_or(0.0)))
}
