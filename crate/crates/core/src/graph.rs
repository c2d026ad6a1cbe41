//! Small explicit-graph utilities shared by the automata code.

/// Strongly connected components of a graph given as adjacency lists.
///
/// Returns the component id of every node; ids are assigned in reverse
/// topological order (a component's successors get smaller ids).
pub fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, next)) = call.last() {
            if next < adj[v].len() {
                let w = adj[v][next];
                call.last_mut().expect("non-empty").1 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    comp
}

/// Marks nodes that lie on some cycle (non-trivial component or self-loop).
pub fn cyclic_nodes(adj: &[Vec<usize>], comp: &[usize]) -> Vec<bool> {
    let mut size = vec![0usize; comp.iter().copied().max().map_or(0, |m| m + 1)];
    for &c in comp {
        size[c] += 1;
    }
    (0..adj.len()).map(|v| size[comp[v]] > 1 || adj[v].contains(&v)).collect()
}

/// Nodes from which some node in `targets` is reachable (including the targets).
pub fn backward_reach(adj: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let mut seen = targets.to_vec();
    let mut queue: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
    while let Some(v) = queue.pop() {
        for &u in &rev[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push(u);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_of_small_graph() {
        // 0 -> 1 -> 2 -> 1, 2 -> 3, 3 -> 3
        let adj = vec![vec![1], vec![2], vec![1, 3], vec![3]];
        let comp = tarjan(&adj);
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[0], comp[1]);
        assert!(comp[3] < comp[1] && comp[1] < comp[0]);
        assert_eq!(cyclic_nodes(&adj, &comp), vec![false, true, true, true]);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        let comp = tarjan(&adj);
        assert!(comp.iter().all(|&c| c == comp[0]));
    }
}
