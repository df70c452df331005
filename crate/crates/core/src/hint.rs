//! Next-step hints: the attempt with one edit applied towards the solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::code::{Branch, Code, CodeLabel};
use crate::ted::{self, Flat, Tree};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Edit {
    Relabel(usize, CodeLabel),
    Delete(usize),
    /// Wrap children `from..to` of `parent` in a new node; `tags` re-tags the
    /// adopted children.
    Insert { parent: usize, from: usize, to: usize, label: CodeLabel, tags: Vec<Branch> },
}

fn with_tag(label: CodeLabel, tag: Branch) -> CodeLabel {
    match label {
        CodeLabel::Node(_, k) => CodeLabel::Node(tag, k),
        CodeLabel::Root => CodeLabel::Root,
    }
}

fn tag_of(label: &CodeLabel) -> Branch {
    match label {
        CodeLabel::Node(b, _) => *b,
        CodeLabel::Root => Branch::Body,
    }
}

fn is_construct(label: &CodeLabel) -> bool {
    matches!(label, CodeLabel::Node(_, k) if k.is_construct())
}

fn rebuild(t: &Tree<CodeLabel>, edit: &Edit, next: &mut usize) -> Vec<Tree<CodeLabel>> {
    let groups: Vec<Vec<Tree<CodeLabel>>> = t.children.iter().map(|c| rebuild(c, edit, next)).collect();
    let id = *next;
    *next += 1;
    let children = match edit {
        Edit::Insert { parent, from, to, label, tags } if *parent == id => {
            let mut out = Vec::new();
            let mut wrapped = Vec::new();
            for (k, g) in groups.into_iter().enumerate() {
                if k == *from {
                    out.push(Tree::new(label.clone(), Vec::new()));
                }
                if (*from..*to).contains(&k) {
                    wrapped.extend(g.into_iter().map(|mut c| {
                        c.label = with_tag(c.label, tags[k - from]);
                        c
                    }));
                } else {
                    out.extend(g);
                }
            }
            if *from >= t.children.len() {
                out.push(Tree::new(label.clone(), Vec::new()));
            }
            out[*from].children = wrapped;
            out
        }
        _ => groups.into_iter().flatten().collect(),
    };
    match edit {
        Edit::Delete(i) if *i == id => {
            let tag = tag_of(&t.label);
            children
                .into_iter()
                .map(|mut c| {
                    c.label = with_tag(c.label, tag);
                    c
                })
                .collect()
        }
        Edit::Relabel(i, l) if *i == id => vec![Tree::new(l.clone(), children)],
        _ => vec![Tree::new(t.label.clone(), children)],
    }
}

fn children_of<L>(f: &Flat<'_, L>, p: usize) -> Vec<usize> {
    (0..f.len()).filter(|&i| f.parent[i] == Some(p)).collect()
}

fn insertion(fa: &Flat<'_, CodeLabel>, fb: &Flat<'_, CodeLabel>, script: &ted::EditScript, j: usize) -> Option<Edit> {
    let pa = script.partner_of_b(fb.parent[j]?)?;
    let kids = children_of(fa, pa);
    let under: Vec<usize> = kids
        .iter()
        .enumerate()
        .filter(|(_, &x)| script.partner_of_a(x).is_some_and(|y| fb.is_ancestor(j, y)))
        .map(|(k, _)| k)
        .collect();
    let (from, to) = match (under.first(), under.last()) {
        (Some(&f), Some(&l)) => (f, l + 1),
        _ => {
            let left = kids
                .iter()
                .rposition(|&x| script.partner_of_a(x).is_some_and(|y| y < fb.lmd[j]))
                .map_or(0, |k| k + 1);
            (left, left)
        }
    };
    let b_kids = children_of(fb, j);
    let tags = kids[from..to]
        .iter()
        .map(|&x| {
            let y = script.partner_of_a(x);
            b_kids
                .iter()
                .find(|&&c| y.is_some_and(|y| c == y || fb.is_ancestor(c, y)))
                .map_or(Branch::Body, |&c| tag_of(fb.label(c)))
        })
        .collect();
    Some(Edit::Insert { parent: pa, from, to, label: fb.label(j).clone(), tags })
}

/// `attempt` with the single edit from its edit script to `solution` that
/// best moves it towards the solution's constructs. Construct insertions come
/// first, then construct relabels and deletions, then action edits. Edits
/// that would break the grammar are skipped; `None` means no edit helps.
pub fn next_step(attempt: &Code, solution: &Code) -> Option<Code> {
    let ta = attempt.to_tree();
    let tb = solution.to_tree();
    let fa = Flat::new(&ta);
    let fb = Flat::new(&tb);
    let script = ted::edit_script(&ta, &tb);

    let mut inserts: Vec<usize> = script.inserted.clone();
    inserts.sort_unstable_by(|a, b| b.cmp(a));
    let relabel = |&(i, j): &(usize, usize)| Edit::Relabel(i, with_tag(fb.label(j).clone(), tag_of(fa.label(i))));

    let mut ordered: Vec<Edit> = Vec::new();
    let construct_inserts = inserts.iter().filter(|&&j| is_construct(fb.label(j)));
    ordered.extend(construct_inserts.filter_map(|&j| insertion(&fa, &fb, &script, j)));
    let (c_rel, a_rel): (Vec<_>, Vec<_>) =
        script.relabeled.iter().partition(|(i, j)| is_construct(fa.label(*i)) || is_construct(fb.label(*j)));
    ordered.extend(c_rel.iter().map(relabel));
    let (c_del, a_del): (Vec<usize>, Vec<usize>) = script.deleted.iter().partition(|&&i| is_construct(fa.label(i)));
    ordered.extend(c_del.into_iter().map(Edit::Delete));
    ordered.extend(a_rel.iter().map(relabel));
    let action_inserts = inserts.iter().filter(|&&j| !is_construct(fb.label(j)));
    ordered.extend(action_inserts.filter_map(|&j| insertion(&fa, &fb, &script, j)));
    ordered.extend(a_del.into_iter().map(Edit::Delete));

    ordered.iter().find_map(|e| {
        let mut next = 0;
        let tree = rebuild(&ta, e, &mut next).pop()?;
        let code = Code::from_tree(&tree)?;
        (code.is_valid() && code != *attempt).then_some(code)
    })
}
