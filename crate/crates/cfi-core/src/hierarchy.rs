//! Derived graph structures: class hierarchy, vtable hierarchy, islands,
//! sub-hierarchies, and vtable entry resolution.
//!
//! All builders take validated facts, are pure, and produce immutable
//! values that are safe to share across threads.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::facts::{ClassId, EntryKind, FunctionId, ProgramFacts, VTableId, VTableRecord};

/// Reflexive-transitive derived closure of a root node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubHierarchy<Id> {
    pub root: Id,
    pub members: BTreeSet<Id>,
}

/// Inheritance graph over all classes (virtual and non-virtual), with
/// edges base -> derived and precomputed descendant sets.
#[derive(Debug, Clone)]
pub struct ClassHierarchy {
    ids: Vec<ClassId>,
    index: BTreeMap<ClassId, u32>,
    children: Vec<Vec<u32>>,
    parents: Vec<Vec<u32>>,
    /// Reflexive-transitive closure, one sorted node list per class.
    descendants: Vec<Vec<u32>>,
}

impl ClassHierarchy {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn node_index(&self, id: &ClassId) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, node: u32) -> &ClassId {
        &self.ids[node as usize]
    }

    /// Directed edges base -> derived, ascending by (base, derived) id.
    pub fn edges(&self) -> Vec<(&ClassId, &ClassId)> {
        let mut out = Vec::new();
        for (node, kids) in self.children.iter().enumerate() {
            for &k in kids {
                out.push((&self.ids[node], &self.ids[k as usize]));
            }
        }
        out.sort();
        out
    }

    pub fn direct_derived(&self, id: &ClassId) -> impl Iterator<Item = &ClassId> {
        self.index
            .get(id)
            .map(|&n| self.children[n as usize].as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&k| &self.ids[k as usize])
    }

    pub fn direct_bases(&self, id: &ClassId) -> impl Iterator<Item = &ClassId> {
        self.index
            .get(id)
            .map(|&n| self.parents[n as usize].as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&k| &self.ids[k as usize])
    }

    /// Descendants of `id`, reflexive, ascending by id.
    pub fn descendants(&self, id: &ClassId) -> Option<impl Iterator<Item = &ClassId>> {
        let n = self.node_index(id)?;
        Some(self.descendants[n as usize].iter().map(|&k| &self.ids[k as usize]))
    }

    pub(crate) fn descendant_nodes(&self, node: u32) -> &[u32] {
        &self.descendants[node as usize]
    }

    /// True iff `derived` is `base` or reachable from it.
    pub fn derives(&self, base: &ClassId, derived: &ClassId) -> bool {
        match (self.node_index(base), self.node_index(derived)) {
            (Some(b), Some(d)) => self.descendants[b as usize].binary_search(&d).is_ok(),
            _ => false,
        }
    }
}

/// Build the class hierarchy of `facts`.
pub fn build_class_hierarchy(facts: &ProgramFacts) -> ClassHierarchy {
    let ids: Vec<ClassId> = facts.classes.keys().cloned().collect();
    let index: BTreeMap<ClassId, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as u32))
        .collect();
    let n = ids.len();
    let mut children = vec![Vec::new(); n];
    let mut parents = vec![Vec::new(); n];
    for class in facts.classes.values() {
        let d = index[&class.id];
        for base in &class.bases {
            if let Some(&b) = index.get(&base.class) {
                children[b as usize].push(d);
                parents[d as usize].push(b);
            }
        }
    }

    // Descendant closure, derived-first so child sets are complete when a
    // base is processed. Kahn order over base -> derived edges, reversed.
    let mut in_deg: Vec<u32> = vec![0; n];
    for kids in &children {
        for &k in kids {
            in_deg[k as usize] += 1;
        }
    }
    let mut queue: Vec<u32> = (0..n as u32).filter(|&v| in_deg[v as usize] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        topo.push(v);
        for &k in &children[v as usize] {
            in_deg[k as usize] -= 1;
            if in_deg[k as usize] == 0 {
                queue.push(k);
            }
        }
    }
    // Validated facts are acyclic; any leftover nodes (cycle) still get a
    // reflexive set so downstream code cannot loop.
    let mut descendants: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut seen: Vec<bool> = vec![false; n];
    for &v in topo.iter().rev() {
        seen[v as usize] = true;
        let mut set: BTreeSet<u32> = BTreeSet::new();
        set.insert(v);
        for &k in &children[v as usize] {
            set.extend(descendants[k as usize].iter().copied());
        }
        descendants[v as usize] = set.into_iter().collect();
    }
    for v in 0..n {
        if !seen[v] {
            descendants[v] = vec![v as u32];
        }
    }

    ClassHierarchy {
        ids,
        index,
        children,
        parents,
        descendants,
    }
}

/// Compute the class sub-hierarchy rooted at `root` (reflexive closure
/// toward derived classes). `None` if the root is unknown.
pub fn class_sub_hierarchy(ch: &ClassHierarchy, root: &ClassId) -> Option<SubHierarchy<ClassId>> {
    let n = ch.node_index(root)?;
    let members = ch.descendants[n as usize]
        .iter()
        .map(|&k| ch.ids[k as usize].clone())
        .collect();
    Some(SubHierarchy {
        root: root.clone(),
        members,
    })
}

/// Inheritance graph over the vtables of virtual classes.
///
/// A table's parent is the table of the corresponding base sub-object:
/// the one whose base path is the nearest existing suffix of its own base
/// path. Islands are the connected families of tables, where tables of a
/// single class always belong to one family (a class with several tables
/// welds the hierarchies of its bases together, which is how multiple
/// inheritance merges two previously unrelated families).
#[derive(Debug, Clone)]
pub struct VTableHierarchy {
    ids: Vec<VTableId>,
    index: BTreeMap<VTableId, u32>,
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    /// Least-derived origin table of each node's chain.
    root: Vec<u32>,
    island: Vec<u32>,
    islands: Vec<Vec<u32>>,
}

impl VTableHierarchy {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn node_index(&self, id: &VTableId) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, node: u32) -> &VTableId {
        &self.ids[node as usize]
    }

    pub fn parent_of(&self, id: &VTableId) -> Option<&VTableId> {
        let n = self.node_index(id)?;
        self.parent[n as usize].map(|p| &self.ids[p as usize])
    }

    pub fn children_of(&self, id: &VTableId) -> impl Iterator<Item = &VTableId> {
        self.index
            .get(id)
            .map(|&n| self.children[n as usize].as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&k| &self.ids[k as usize])
    }

    /// Directed edges parent -> child, ascending by (parent, child) id.
    pub fn edges(&self) -> Vec<(&VTableId, &VTableId)> {
        let mut out = Vec::new();
        for (node, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out.push((&self.ids[*p as usize], &self.ids[node]));
            }
        }
        out.sort();
        out
    }

    /// Least-derived origin table of the chain containing `id`.
    pub fn root_of(&self, id: &VTableId) -> Option<&VTableId> {
        let n = self.node_index(id)?;
        Some(&self.ids[self.root[n as usize] as usize])
    }

    pub fn island_of(&self, id: &VTableId) -> Option<usize> {
        let n = self.node_index(id)?;
        Some(self.island[n as usize] as usize)
    }

    pub fn island_count(&self) -> usize {
        self.islands.len()
    }

    pub fn tables_in_island(&self, island: usize) -> impl Iterator<Item = &VTableId> {
        self.islands
            .get(island)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&k| &self.ids[k as usize])
    }

    pub(crate) fn island_of_node(&self, node: u32) -> u32 {
        self.island[node as usize]
    }

    pub(crate) fn children_of_node(&self, node: u32) -> &[u32] {
        &self.children[node as usize]
    }
}

/// Build the vtable hierarchy of `facts`. Only tables owned by virtual
/// classes contribute nodes.
pub fn build_vtable_hierarchy(facts: &ProgramFacts) -> VTableHierarchy {
    let ids: Vec<VTableId> = facts
        .vtables
        .values()
        .filter(|vt| {
            facts
                .classes
                .get(&vt.owning_class)
                .map(|c| c.is_virtual_class)
                .unwrap_or(false)
        })
        .map(|vt| vt.id.clone())
        .collect();
    let index: BTreeMap<VTableId, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as u32))
        .collect();
    let n = ids.len();

    // Full base path -> node. Paths are unique per table (validated).
    let by_path: BTreeMap<&[ClassId], u32> = ids
        .iter()
        .map(|id| {
            let vt = &facts.vtables[id];
            (vt.base_path.as_slice(), index[id])
        })
        .collect();

    let mut parent: Vec<Option<u32>> = vec![None; n];
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
    for id in &ids {
        let node = index[id];
        let path = facts.vtables[id].base_path.as_slice();
        for cut in 1..path.len() {
            if let Some(&p) = by_path.get(&path[cut..]) {
                parent[node as usize] = Some(p);
                children[p as usize].push(node);
                break;
            }
        }
    }

    // Chain origin: walk parents to the top.
    let mut root: Vec<u32> = (0..n as u32).collect();
    for v in 0..n as u32 {
        let mut cur = v;
        while let Some(p) = parent[cur as usize] {
            cur = p;
        }
        root[v as usize] = cur;
    }

    // Islands: union over parent links and over tables of one class.
    let mut dsu = Dsu::new(n);
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            dsu.union(v as u32, *p);
        }
    }
    let mut by_class: BTreeMap<&ClassId, u32> = BTreeMap::new();
    for id in &ids {
        let vt = &facts.vtables[id];
        let node = index[id];
        match by_class.get(&vt.owning_class) {
            Some(&first) => {
                dsu.union(first, node);
            }
            None => {
                by_class.insert(&vt.owning_class, node);
            }
        }
    }
    // Deterministic island numbering: by smallest member node.
    let mut island = vec![0u32; n];
    let mut islands: Vec<Vec<u32>> = Vec::new();
    let mut rep_to_island: BTreeMap<u32, u32> = BTreeMap::new();
    for v in 0..n as u32 {
        let rep = dsu.find(v);
        let idx = *rep_to_island.entry(rep).or_insert_with(|| {
            islands.push(Vec::new());
            (islands.len() - 1) as u32
        });
        island[v as usize] = idx;
        islands[idx as usize].push(v);
    }

    VTableHierarchy {
        ids,
        index,
        parent,
        children,
        root,
        island,
        islands,
    }
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, v: u32) -> u32 {
        let mut r = v;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        let mut cur = v;
        while self.parent[cur as usize] != r {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = r;
            cur = next;
        }
        r
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller representative for determinism.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Partition of the vtable ids into islands, each ascending by id, the
/// partition ordered by its smallest member.
pub fn find_islands(vh: &VTableHierarchy) -> Vec<BTreeSet<VTableId>> {
    (0..vh.island_count())
        .map(|i| vh.tables_in_island(i).cloned().collect())
        .collect()
}

/// Compute the vtable sub-hierarchy rooted at `root` (reflexive closure
/// toward derived tables). `None` if the root is unknown.
pub fn vtable_sub_hierarchy(vh: &VTableHierarchy, root: &VTableId) -> Option<SubHierarchy<VTableId>> {
    let start = vh.node_index(root)?;
    let mut members = BTreeSet::new();
    let mut stack = vec![start];
    let mut seen = vec![false; vh.node_count()];
    seen[start as usize] = true;
    while let Some(v) = stack.pop() {
        members.insert(vh.ids[v as usize].clone());
        for &k in &vh.children[v as usize] {
            if !seen[k as usize] {
                seen[k as usize] = true;
                stack.push(k);
            }
        }
    }
    Some(SubHierarchy {
        root: root.clone(),
        members,
    })
}

/// Tables of `class`, ascending by sub-object order.
pub fn vtable_set<'f>(facts: &'f ProgramFacts, class: &ClassId) -> Vec<&'f VTableRecord> {
    facts.vtable_set(class)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolveError {
    UnknownVTable(String),
    EntryIndexOutOfRange { vtable: String, index: u32, slots: u32 },
}

impl fmt::Display for ResolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolveError::UnknownVTable(id) => write!(f, "unknown vtable {id}"),
            ResolveError::EntryIndexOutOfRange { vtable, index, slots } => write!(
                f,
                "entry index {index} out of range for vtable {vtable} ({slots} function slots)"
            ),
        }
    }
}

impl core::error::Error for ResolveError {}

/// Resolve the function a table slot points to.
///
/// Thunks resolve to their ultimate target; pure slots resolve to `None`.
/// Offset entries do not occupy function slots and are skipped by the
/// index arithmetic.
pub fn resolve_entry<'f>(
    facts: &'f ProgramFacts,
    vtable: &VTableId,
    entry_index: u32,
) -> Result<Option<&'f FunctionId>, ResolveError> {
    let vt = facts
        .vtable(vtable)
        .ok_or_else(|| ResolveError::UnknownVTable(String::from(vtable.as_str())))?;
    resolve_slot(vt, entry_index)
}

pub(crate) fn resolve_slot(
    vt: &VTableRecord,
    entry_index: u32,
) -> Result<Option<&FunctionId>, ResolveError> {
    let mut slots = 0u32;
    for entry in vt.function_slots() {
        if slots == entry_index {
            return Ok(match entry.kind {
                EntryKind::Pure => None,
                _ => entry.function_id.as_ref(),
            });
        }
        slots += 1;
    }
    Err(ResolveError::EntryIndexOutOfRange {
        vtable: String::from(vt.id.as_str()),
        index: entry_index,
        slots,
    })
}
