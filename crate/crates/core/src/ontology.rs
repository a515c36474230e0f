//! Hierarchical task ontology: a rooted category tree whose nodes carry task
//! articles.
//!
//! Loading validates the whole document and reports every problem at once.
//! Children and articles keep file order and every traversal here follows it.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::fnv1a64;

pub const ONTOLOGY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskArticle {
    pub id: String,
    /// The task description, e.g. "Pitch a Baseball".
    pub title: String,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyNode {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default)]
    pub articles: Vec<String>,
}

/// On-disk shape of an ontology file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyDocument {
    pub format_version: u32,
    pub root: String,
    pub nodes: Vec<OntologyNode>,
    pub articles: Vec<TaskArticle>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    UnsupportedVersion(u32),
    EmptyNodeId,
    EmptyArticleId,
    EmptyTitle { article: String },
    DuplicateNode { node: String },
    DuplicateArticle { article: String },
    UnknownRoot { root: String },
    DanglingChild { node: String, child: String },
    DanglingArticle { node: String, article: String },
    MultipleParents { node: String },
    RootHasParent { root: String },
    Cycle { node: String },
    ArticlelessLeaf { node: String },
    Unreachable { node: String },
    ArticleListedTwice { article: String },
    OrphanArticle { article: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            UnsupportedVersion(v) => write!(f, "unsupported format_version {v}"),
            EmptyNodeId => write!(f, "node with empty id"),
            EmptyArticleId => write!(f, "article with empty id"),
            EmptyTitle { article } => write!(f, "article {article:?} has an empty title"),
            DuplicateNode { node } => write!(f, "duplicate node id {node:?}"),
            DuplicateArticle { article } => write!(f, "duplicate article id {article:?}"),
            UnknownRoot { root } => write!(f, "root {root:?} is not a node"),
            DanglingChild { node, child } => {
                write!(f, "node {node:?} lists unknown child {child:?}")
            }
            DanglingArticle { node, article } => {
                write!(f, "node {node:?} lists unknown article {article:?}")
            }
            MultipleParents { node } => write!(f, "node {node:?} has more than one parent"),
            RootHasParent { root } => write!(f, "root {root:?} is listed as a child"),
            Cycle { node } => write!(f, "cycle through node {node:?}"),
            ArticlelessLeaf { node } => write!(f, "leaf node {node:?} carries no articles"),
            Unreachable { node } => write!(f, "node {node:?} is unreachable from the root"),
            ArticleListedTwice { article } => {
                write!(f, "article {article:?} is attached to more than one node")
            }
            OrphanArticle { article } => {
                write!(f, "article {article:?} is not attached to any node")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("malformed ontology document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid ontology ({} issue(s)): {}", .0.len(), join_issues(.0))]
    Invalid(Vec<ValidationIssue>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArticleIx(pub usize);

/// A validated ontology. Nodes and articles are addressed by dense indices
/// in file order; string ids map onto them.
#[derive(Debug, Clone)]
pub struct Ontology {
    root: NodeIx,
    nodes: Vec<OntologyNode>,
    articles: Vec<TaskArticle>,
    node_lookup: HashMap<String, NodeIx>,
    article_lookup: HashMap<String, ArticleIx>,
    children: Vec<Vec<NodeIx>>,
    node_articles: Vec<Vec<ArticleIx>>,
    parent: Vec<Option<NodeIx>>,
    depth: Vec<usize>,
    preorder: Vec<NodeIx>,
    preorder_rank: Vec<usize>,
}

impl Ontology {
    pub fn load<R: Read>(reader: R) -> Result<Self, OntologyError> {
        let doc: OntologyDocument = serde_json::from_reader(reader)?;
        Self::from_document(doc)
    }

    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let doc: OntologyDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: OntologyDocument) -> Result<Self, OntologyError> {
        let issues = validate(&doc);
        if !issues.is_empty() {
            return Err(OntologyError::Invalid(issues));
        }
        Ok(Self::assemble(doc))
    }

    /// Builds the indexed form. Unresolvable references are skipped, so this
    /// is only meaningful on documents that passed [`validate`].
    fn assemble(doc: OntologyDocument) -> Self {
        let mut node_lookup = HashMap::with_capacity(doc.nodes.len());
        for (i, n) in doc.nodes.iter().enumerate() {
            node_lookup.entry(n.id.clone()).or_insert(NodeIx(i));
        }
        let mut article_lookup = HashMap::with_capacity(doc.articles.len());
        for (i, a) in doc.articles.iter().enumerate() {
            article_lookup.entry(a.id.clone()).or_insert(ArticleIx(i));
        }
        let children: Vec<Vec<NodeIx>> = doc
            .nodes
            .iter()
            .map(|n| {
                n.children
                    .iter()
                    .filter_map(|c| node_lookup.get(c).copied())
                    .collect()
            })
            .collect();
        let node_articles: Vec<Vec<ArticleIx>> = doc
            .nodes
            .iter()
            .map(|n| {
                n.articles
                    .iter()
                    .filter_map(|a| article_lookup.get(a).copied())
                    .collect()
            })
            .collect();

        let root = node_lookup[&doc.root];
        let n = doc.nodes.len();
        let mut parent = vec![None; n];
        let mut depth = vec![0usize; n];
        let mut preorder = Vec::with_capacity(n);
        let mut preorder_rank = vec![usize::MAX; n];
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if preorder_rank[node.0] != usize::MAX {
                continue;
            }
            preorder_rank[node.0] = preorder.len();
            preorder.push(node);
            for &child in children[node.0].iter().rev() {
                parent[child.0] = Some(node);
                depth[child.0] = depth[node.0] + 1;
                stack.push(child);
            }
        }

        Self {
            root,
            nodes: doc.nodes,
            articles: doc.articles,
            node_lookup,
            article_lookup,
            children,
            node_articles,
            parent,
            depth,
            preorder,
            preorder_rank,
        }
    }

    pub fn to_document(&self) -> OntologyDocument {
        OntologyDocument {
            format_version: ONTOLOGY_FORMAT_VERSION,
            root: self.nodes[self.root.0].id.clone(),
            nodes: self.nodes.clone(),
            articles: self.articles.clone(),
        }
    }

    /// Compact JSON of [`Ontology::to_document`]; the checksum input.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_document()).expect("ontology serializes")
    }

    pub fn checksum(&self) -> u64 {
        fnv1a64(&self.canonical_bytes())
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn article_count(&self) -> usize {
        self.articles.len()
    }

    pub fn node(&self, ix: NodeIx) -> &OntologyNode {
        &self.nodes[ix.0]
    }

    pub fn article(&self, ix: ArticleIx) -> &TaskArticle {
        &self.articles[ix.0]
    }

    pub fn node_ix(&self, id: &str) -> Option<NodeIx> {
        self.node_lookup.get(id).copied()
    }

    pub fn article_ix(&self, id: &str) -> Option<ArticleIx> {
        self.article_lookup.get(id).copied()
    }

    pub fn children(&self, ix: NodeIx) -> &[NodeIx] {
        &self.children[ix.0]
    }

    pub fn articles_of(&self, ix: NodeIx) -> &[ArticleIx] {
        &self.node_articles[ix.0]
    }

    pub fn parent(&self, ix: NodeIx) -> Option<NodeIx> {
        self.parent[ix.0]
    }

    pub fn depth(&self, ix: NodeIx) -> usize {
        self.depth[ix.0]
    }

    pub fn is_leaf(&self, ix: NodeIx) -> bool {
        self.children[ix.0].is_empty()
    }

    /// All nodes, root first, children in file order.
    pub fn preorder(&self) -> &[NodeIx] {
        &self.preorder
    }

    pub fn preorder_rank(&self, ix: NodeIx) -> usize {
        self.preorder_rank[ix.0]
    }

    pub fn node_indices(&self) -> impl Iterator<Item = NodeIx> {
        (0..self.nodes.len()).map(NodeIx)
    }

    pub fn article_indices(&self) -> impl Iterator<Item = ArticleIx> {
        (0..self.articles.len()).map(ArticleIx)
    }

    /// True when `node` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn is_in_subtree(&self, node: NodeIx, ancestor: NodeIx) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.parent[n.0];
        }
        false
    }

    /// Article indices of the subtree rooted at `node`, node by node in
    /// preorder, each node's own articles in file order.
    pub fn descendants_articles_ix(&self, node: NodeIx) -> Vec<ArticleIx> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.extend_from_slice(&self.node_articles[n.0]);
            stack.extend(self.children[n.0].iter().rev());
        }
        out
    }

    /// String-id form of [`Ontology::descendants_articles_ix`].
    pub fn descendants_articles(&self, node: &str) -> Result<Vec<&str>, OntologyError> {
        let ix = self
            .node_ix(node)
            .ok_or_else(|| OntologyError::UnknownNode(node.to_string()))?;
        Ok(self
            .descendants_articles_ix(ix)
            .into_iter()
            .map(|a| self.articles[a.0].id.as_str())
            .collect())
    }
}

/// Collects every structural problem in `doc`.
pub fn validate(doc: &OntologyDocument) -> Vec<ValidationIssue> {
    use ValidationIssue::*;
    let mut issues = Vec::new();

    if doc.format_version != ONTOLOGY_FORMAT_VERSION {
        issues.push(UnsupportedVersion(doc.format_version));
    }

    let mut node_lookup: HashMap<&str, usize> = HashMap::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id.is_empty() {
            issues.push(EmptyNodeId);
        }
        if node_lookup.insert(n.id.as_str(), i).is_some() {
            issues.push(DuplicateNode { node: n.id.clone() });
            // First occurrence wins for the remaining checks.
            let first = doc.nodes.iter().position(|m| m.id == n.id).unwrap();
            node_lookup.insert(n.id.as_str(), first);
        }
    }
    let mut article_ids: HashSet<&str> = HashSet::new();
    for a in &doc.articles {
        if a.id.is_empty() {
            issues.push(EmptyArticleId);
        }
        if a.title.trim().is_empty() {
            issues.push(EmptyTitle {
                article: a.id.clone(),
            });
        }
        if !article_ids.insert(a.id.as_str()) {
            issues.push(DuplicateArticle {
                article: a.id.clone(),
            });
        }
    }

    let root = node_lookup.get(doc.root.as_str()).copied();
    if root.is_none() {
        issues.push(UnknownRoot {
            root: doc.root.clone(),
        });
    }

    let n = doc.nodes.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent_count = vec![0usize; n];
    let mut article_owner: HashMap<&str, usize> = HashMap::new();
    let mut resolved_articles = vec![0usize; n];
    for (i, node) in doc.nodes.iter().enumerate() {
        if node_lookup[node.id.as_str()] != i {
            continue;
        }
        for child in &node.children {
            match node_lookup.get(child.as_str()) {
                Some(&c) => {
                    children[i].push(c);
                    parent_count[c] += 1;
                }
                None => issues.push(DanglingChild {
                    node: node.id.clone(),
                    child: child.clone(),
                }),
            }
        }
        for article in &node.articles {
            if !article_ids.contains(article.as_str()) {
                issues.push(DanglingArticle {
                    node: node.id.clone(),
                    article: article.clone(),
                });
                continue;
            }
            resolved_articles[i] += 1;
            if article_owner.insert(article.as_str(), i).is_some() {
                issues.push(ArticleListedTwice {
                    article: article.clone(),
                });
            }
        }
    }
    let mut reported_orphans = HashSet::new();
    for a in &doc.articles {
        if !article_owner.contains_key(a.id.as_str()) && reported_orphans.insert(a.id.as_str()) {
            issues.push(OrphanArticle {
                article: a.id.clone(),
            });
        }
    }

    for (i, node) in doc.nodes.iter().enumerate() {
        if node_lookup[node.id.as_str()] != i {
            continue;
        }
        if Some(i) == root {
            if parent_count[i] > 0 {
                issues.push(RootHasParent {
                    root: node.id.clone(),
                });
            }
        } else if parent_count[i] > 1 {
            issues.push(MultipleParents {
                node: node.id.clone(),
            });
        }
        if children[i].is_empty() && resolved_articles[i] == 0 {
            issues.push(ArticlelessLeaf {
                node: node.id.clone(),
            });
        }
    }

    for c in find_cycles(&children) {
        issues.push(Cycle {
            node: doc.nodes[c].id.clone(),
        });
    }

    if let Some(root) = root {
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut seen[x], true) {
                continue;
            }
            stack.extend(children[x].iter().copied());
        }
        for (i, node) in doc.nodes.iter().enumerate() {
            if !seen[i] && node_lookup[node.id.as_str()] == i {
                issues.push(Unreachable {
                    node: node.id.clone(),
                });
            }
        }
    }

    issues
}

/// Targets of back edges in an iterative DFS, each reported once, in
/// discovery order.
fn find_cycles(children: &[Vec<usize>]) -> Vec<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = children.len();
    let mut mark = vec![Mark::White; n];
    let mut reported = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        mark[start] = Mark::Grey;
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if top.1 < children[node].len() {
                let child = children[node][top.1];
                top.1 += 1;
                match mark[child] {
                    Mark::White => {
                        mark[child] = Mark::Grey;
                        stack.push((child, 0));
                    }
                    Mark::Grey => {
                        if !std::mem::replace(&mut reported[child], true) {
                            out.push(child);
                        }
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    out
}
