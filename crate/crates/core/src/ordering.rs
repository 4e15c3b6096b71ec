//! Block decoding orders and multi-request navigation planning.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::blocks::{available_contexts, BlockGrid, Context, Side};
use crate::error::{invalid, Error, Result};
use crate::geom::{viewport_footprint, ViewportSpec};
use crate::placement::{block_direction, AccessBlockSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    #[serde(rename = "snake")]
    SnakeLike,
    GreedyCount,
    GreedyRate,
}

impl std::str::FromStr for OrderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snake" => Ok(OrderKind::SnakeLike),
            "greedycount" => Ok(OrderKind::GreedyCount),
            "greedyrate" => Ok(OrderKind::GreedyRate),
            _ => Err(invalid(format!("unknown order {s}"))),
        }
    }
}

impl std::fmt::Display for OrderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrderKind::SnakeLike => "snake",
            OrderKind::GreedyCount => "greedycount",
            OrderKind::GreedyRate => "greedyrate",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodingOrder {
    pub blocks: Vec<usize>,
    /// Bits the decoder needs to reproduce the permutation.
    pub signaling_bits: usize,
}

/// ceil(|J| log2 |J|), the cost of sending an explicit permutation.
pub fn permutation_signaling_bits(len: usize) -> usize {
    if len < 2 {
        return 0;
    }
    (len as f64 * (len as f64).log2()).ceil() as usize
}

fn membership(grid: &BlockGrid, j: &[usize], start: usize) -> Result<Vec<bool>> {
    let mut in_j = vec![false; grid.len()];
    for &b in j {
        if b >= grid.len() {
            return Err(invalid(format!("block {b} outside the grid")));
        }
        in_j[b] = true;
    }
    if !in_j[start] {
        return Err(invalid(format!("start block {start} is not requested")));
    }
    Ok(in_j)
}

fn side_order(prefer_horizontal: bool) -> [Side; 4] {
    if prefer_horizontal {
        [Side::Right, Side::Left, Side::Bottom, Side::Top]
    } else {
        [Side::Bottom, Side::Top, Side::Right, Side::Left]
    }
}

fn disconnected(j: &[usize], placed: usize) -> Error {
    Error::Disconnected(format!("{} of {} requested blocks unreachable from the start", j.len() - placed, j.len()))
}

/// Depth-first scan: step to an unvisited horizontal neighbour of the last
/// placed block, else a vertical one, else back up to the most recently
/// placed block that still has one.
pub fn snake_like(grid: &BlockGrid, j: &[usize], start: usize, prefer_horizontal: bool) -> Result<DecodingOrder> {
    let in_j = membership(grid, j, start)?;
    let total = in_j.iter().filter(|&&x| x).count();
    let mut visited = vec![false; grid.len()];
    let mut order = vec![start];
    visited[start] = true;
    let mut stack = vec![start];
    let sides = side_order(prefer_horizontal);
    while let Some(&top) = stack.last() {
        let next = sides.iter().filter_map(|&s| grid.neighbor(top, s)).find(|&nb| in_j[nb] && !visited[nb]);
        match next {
            Some(nb) => {
                visited[nb] = true;
                order.push(nb);
                stack.push(nb);
            }
            None => {
                stack.pop();
            }
        }
    }
    if order.len() != total {
        return Err(disconnected(j, order.len()));
    }
    Ok(DecodingOrder { blocks: order, signaling_bits: 0 })
}

fn decoded_neighbors(grid: &BlockGrid, b: usize, decoded: &[bool]) -> (usize, bool) {
    let mut nbs = grid.neighbors(b);
    nbs.sort_unstable();
    nbs.dedup();
    let count = nbs.iter().filter(|&&n| decoded[n]).count();
    let horizontal = [Side::Left, Side::Right].iter().any(|&s| grid.neighbor(b, s).is_some_and(|n| decoded[n]));
    (count, horizontal)
}

fn frontier(grid: &BlockGrid, in_j: &[bool], decoded: &[bool], placed: &[bool]) -> Vec<usize> {
    let mut f: Vec<usize> = (0..grid.len())
        .filter(|&b| in_j[b] && !placed[b] && grid.neighbors(b).iter().any(|&n| placed[n] || (decoded[n] && !in_j[n])))
        .collect();
    f.sort_unstable();
    f
}

/// Repeatedly decodes the frontier block with the most decoded neighbours;
/// ties go to blocks with a decoded horizontal neighbour, then lowest index.
pub fn greedy_count(grid: &BlockGrid, j: &[usize], start: usize, prefer_horizontal: bool) -> Result<DecodingOrder> {
    greedy_count_from(grid, j, start, prefer_horizontal, &vec![false; grid.len()])
}

/// As [`greedy_count`], with blocks outside `j` already decoded.
pub fn greedy_count_from(
    grid: &BlockGrid,
    j: &[usize],
    start: usize,
    prefer_horizontal: bool,
    prior: &[bool],
) -> Result<DecodingOrder> {
    let in_j = membership(grid, j, start)?;
    let total = in_j.iter().filter(|&&x| x).count();
    let mut dec: Vec<bool> = prior.iter().zip(&in_j).map(|(&p, &i)| p && !i).collect();
    let mut placed = vec![false; grid.len()];
    dec[start] = true;
    placed[start] = true;
    let mut order = vec![start];
    while order.len() < total {
        let f = frontier(grid, &in_j, &dec, &placed);
        let pick = f
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let (ca, ha) = decoded_neighbors(grid, a, &dec);
                let (cb, hb) = decoded_neighbors(grid, b, &dec);
                let (ha, hb) = if prefer_horizontal { (ha, hb) } else { (!ha, !hb) };
                ca.cmp(&cb).then(ha.cmp(&hb)).then(b.cmp(&a))
            })
            .ok_or_else(|| disconnected(j, order.len()))?;
        dec[pick] = true;
        placed[pick] = true;
        order.push(pick);
    }
    Ok(DecodingOrder { blocks: order, signaling_bits: 0 })
}

/// Repeatedly decodes the cheapest frontier block under the context the
/// decoder would use for it. The permutation must be signalled.
pub fn greedy_rate(
    grid: &BlockGrid,
    j: &[usize],
    start: usize,
    rate: &dyn Fn(usize, Context) -> usize,
) -> Result<DecodingOrder> {
    greedy_rate_from(grid, j, start, rate, &vec![false; grid.len()])
}

pub fn greedy_rate_from(
    grid: &BlockGrid,
    j: &[usize],
    start: usize,
    rate: &dyn Fn(usize, Context) -> usize,
    prior: &[bool],
) -> Result<DecodingOrder> {
    let in_j = membership(grid, j, start)?;
    let total = in_j.iter().filter(|&&x| x).count();
    let mut dec: Vec<bool> = prior.iter().zip(&in_j).map(|(&p, &i)| p && !i).collect();
    let mut placed = vec![false; grid.len()];
    dec[start] = true;
    placed[start] = true;
    let mut order = vec![start];
    while order.len() < total {
        let f = frontier(grid, &in_j, &dec, &placed);
        let pick = f
            .iter()
            .copied()
            .min_by_key(|&b| (rate(b, available_contexts(grid, b, &dec)), b))
            .ok_or_else(|| disconnected(j, order.len()))?;
        dec[pick] = true;
        placed[pick] = true;
        order.push(pick);
    }
    Ok(DecodingOrder { blocks: order, signaling_bits: permutation_signaling_bits(total) })
}

/// Sum over the order of already-decoded neighbours at decode time.
pub fn neighbor_count_score(grid: &BlockGrid, order: &[usize], prior: &[bool]) -> usize {
    let mut dec = prior.to_vec();
    let mut s = 0;
    for &b in order {
        s += decoded_neighbors(grid, b, &dec).0;
        dec[b] = true;
    }
    s
}

/// One step of a navigation plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedBlock {
    pub block: usize,
    pub context: Context,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NavigationPlan {
    /// Blocks displayed by the request.
    pub footprint: Vec<usize>,
    /// Blocks to decode, in order, with the context each one uses.
    pub steps: Vec<PlannedBlock>,
    pub signaling_bits: usize,
}

/// Connected components of `set` under the grid adjacency, each listed in
/// ascending order; components ordered by their smallest block.
pub fn components(grid: &BlockGrid, set: &[usize]) -> Vec<Vec<usize>> {
    let mut in_set = vec![false; grid.len()];
    for &b in set {
        in_set[b] = true;
    }
    let mut seen = vec![false; grid.len()];
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    for &s in &sorted {
        if seen[s] {
            continue;
        }
        let mut comp = vec![];
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        while let Some(b) = q.pop_front() {
            comp.push(b);
            for n in grid.neighbors(b) {
                if in_set[n] && !seen[n] {
                    seen[n] = true;
                    q.push_back(n);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Shortest grid path from `comp` to a block satisfying `goal`; returns the
/// blocks strictly between them followed by the goal block.
fn bridge(grid: &BlockGrid, comp: &[usize], goal: &dyn Fn(usize) -> bool) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; grid.len()];
    let mut q = VecDeque::new();
    for &b in comp {
        prev[b] = b;
        q.push_back(b);
    }
    while let Some(b) = q.pop_front() {
        let mut nbs = grid.neighbors(b);
        nbs.sort_unstable();
        for n in nbs {
            if prev[n] != usize::MAX {
                continue;
            }
            prev[n] = b;
            if goal(n) {
                let mut path = vec![n];
                let mut c = b;
                while prev[c] != c {
                    path.push(c);
                    c = prev[c];
                }
                path.reverse();
                return Some(path);
            }
            q.push_back(n);
        }
    }
    None
}

/// Orders the undecoded blocks of a request.
///
/// Each connected group of missing blocks starts from the block nearest the
/// view centre that touches decoded data, or else from its access block
/// nearest the centre (decoded without side information). Groups that have
/// neither are joined to the nearest decoded or access block by the shortest
/// grid path.
pub fn plan_navigation(
    grid: &BlockGrid,
    decoded: &[bool],
    spec: &ViewportSpec,
    access: &AccessBlockSet,
    kind: OrderKind,
    prefer_horizontal: bool,
    rate: &dyn Fn(usize, Context) -> usize,
) -> Result<NavigationPlan> {
    if decoded.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!("{} decoded flags for {} blocks", decoded.len(), grid.len())));
    }
    let footprint = viewport_footprint(spec, grid.width(), grid.height(), grid.block_size)?;
    let missing: Vec<usize> = footprint.iter().copied().filter(|&b| !decoded[b]).collect();
    let mut dec = decoded.to_vec();
    let mut steps = Vec::new();
    let mut signaling_bits = 0;
    let dist = |b: usize| block_direction(grid, b).angle_to(&spec.direction);
    let closest =
        |cands: &mut dyn Iterator<Item = usize>| cands.min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let mut pending = components(grid, &missing);
    while !pending.is_empty() {
        let touching = |c: &Vec<usize>, dec: &[bool]| c.iter().any(|&b| grid.neighbors(b).iter().any(|&n| dec[n]));
        let idx = pending
            .iter()
            .position(|c| touching(c, &dec))
            .or_else(|| pending.iter().position(|c| c.iter().any(|&b| access.contains(b))));
        let (comp, start, is_access_start) = match idx {
            Some(i) => {
                let comp = pending.remove(i);
                let adj: Vec<usize> =
                    comp.iter().copied().filter(|&b| grid.neighbors(b).iter().any(|&n| dec[n])).collect();
                if adj.is_empty() {
                    let s = closest(&mut comp.iter().copied().filter(|&b| access.contains(b))).unwrap();
                    (comp, s, true)
                } else {
                    let s = closest(&mut adj.into_iter()).unwrap();
                    (comp, s, false)
                }
            }
            None => {
                let mut comp = pending.remove(0);
                let path = bridge(grid, &comp, &|b| dec[b] || access.contains(b))
                    .ok_or_else(|| Error::Disconnected("no decoded or access block reachable".into()))?;
                let end = *path.last().unwrap();
                let inner: Vec<usize> = if dec[end] { path[..path.len() - 1].to_vec() } else { path.clone() };
                comp.extend(inner);
                // the path may run through other missing groups: absorb them
                let mut joined = true;
                while joined {
                    joined = false;
                    if let Some(k) = pending.iter().position(|c| {
                        c.iter().any(|&b| comp.contains(&b) || grid.neighbors(b).iter().any(|n| comp.contains(n)))
                    }) {
                        comp.extend(pending.remove(k));
                        joined = true;
                    }
                }
                comp.sort_unstable();
                comp.dedup();
                if dec[end] {
                    let s = path[path.len() - 2];
                    (comp, s, false)
                } else {
                    (comp, end, true)
                }
            }
        };
        let order = match kind {
            OrderKind::SnakeLike => snake_like(grid, &comp, start, prefer_horizontal)?,
            OrderKind::GreedyCount => greedy_count_from(grid, &comp, start, prefer_horizontal, &dec)?,
            OrderKind::GreedyRate => {
                let mut o = greedy_rate_from(grid, &comp, start, rate, &dec)?;
                if is_access_start {
                    // the decoder cannot know an isolated group's entry point
                    o.signaling_bits = o.signaling_bits.max(1);
                }
                o
            }
        };
        signaling_bits += order.signaling_bits;
        for (i, &b) in order.blocks.iter().enumerate() {
            let context = if i == 0 && is_access_start { Context::Empty } else { available_contexts(grid, b, &dec) };
            steps.push(PlannedBlock { block: b, context });
            dec[b] = true;
        }
    }
    Ok(NavigationPlan { footprint, steps, signaling_bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Direction;
    use proptest::prelude::*;

    fn grid() -> BlockGrid {
        BlockGrid::new(512, 256, 32).unwrap()
    }

    /// Independent enumeration: every order must only step to a block that
    /// has a previously placed neighbour.
    fn decodable(g: &BlockGrid, order: &[usize]) -> bool {
        let mut placed = vec![false; g.len()];
        for (i, &b) in order.iter().enumerate() {
            if i > 0 && !g.neighbors(b).iter().any(|&n| placed[n]) {
                return false;
            }
            if placed[b] {
                return false;
            }
            placed[b] = true;
        }
        true
    }

    #[test]
    fn snake_row_and_square() {
        let g = grid();
        let row = [16, 17, 18, 19];
        assert_eq!(snake_like(&g, &row, 16, true).unwrap().blocks, vec![16, 17, 18, 19]);
        // 2x2: TL TR BR BL
        assert_eq!(snake_like(&g, &[16, 17, 32, 33], 16, true).unwrap().blocks, vec![16, 17, 33, 32]);
        assert_eq!(snake_like(&g, &[16, 17, 32, 33], 16, false).unwrap().blocks, vec![16, 32, 33, 17]);
    }

    #[test]
    fn snake_backtracks_on_l_shape() {
        let g = grid();
        // column 1..=3 of row 1 plus a tail going down from the start
        let j = [17, 18, 19, 33, 49];
        let o = snake_like(&g, &j, 17, true).unwrap();
        assert_eq!(o.blocks, vec![17, 18, 19, 33, 49]);
        let o = snake_like(&g, &j, 18, true).unwrap();
        // right to 19, dead end, back to 18, left to 17, down 33, 49
        assert_eq!(o.blocks, vec![18, 19, 17, 33, 49]);
        assert!(decodable(&g, &o.blocks));
    }

    #[test]
    fn snake_rejects_disconnected() {
        let g = grid();
        assert!(matches!(snake_like(&g, &[16, 18], 16, true), Err(Error::Disconnected(_))));
        assert!(snake_like(&g, &[16], 17, true).is_err());
    }

    #[test]
    fn greedy_count_examples() {
        let g = grid();
        let row = [16, 17, 18, 19];
        assert_eq!(greedy_count(&g, &row, 16, true).unwrap().blocks, snake_like(&g, &row, 16, true).unwrap().blocks);
        let sq: Vec<usize> = (1..4).flat_map(|r| (1..4).map(move |c| r * 16 + c)).collect();
        let o = greedy_count(&g, &sq, 34, true).unwrap();
        assert_eq!(o.blocks[1], 33);
        assert!(g.is_horizontal_pair(o.blocks[0], o.blocks[1]));
        assert!(decodable(&g, &o.blocks));
    }

    #[test]
    fn greedy_rate_examples() {
        let g = grid();
        let j = [16, 17, 18, 32, 33, 34];
        let uniform = greedy_rate(&g, &j, 16, &|_, _| 10).unwrap();
        assert_eq!(uniform.blocks, vec![16, 17, 18, 32, 33, 34]);
        assert_eq!(uniform.signaling_bits, permutation_signaling_bits(6));
        let o = greedy_rate(&g, &j, 16, &|b, _| if b == 17 { 1000 } else { 10 }).unwrap();
        assert_eq!(*o.blocks.last().unwrap(), 17);
        assert!(decodable(&g, &o.blocks));
    }

    #[test]
    fn navigation_repeat_and_pan() {
        let g = grid();
        let t = ViewportSpec::default_at(Direction::new(0.0, 0.0));
        let a = AccessBlockSet::new((0..g.len()).collect(), crate::placement::AccessStrategy::Fixed, g.len());
        let rate = |_: usize, _: Context| 1usize;
        let p1 = plan_navigation(&g, &vec![false; g.len()], &t, &a, OrderKind::SnakeLike, true, &rate).unwrap();
        assert_eq!(p1.steps[0].context, Context::Empty);
        assert!(p1.steps[1..].iter().all(|s| s.context != Context::Empty));
        let mut dec = vec![false; g.len()];
        for s in &p1.steps {
            dec[s.block] = true;
        }
        let again = plan_navigation(&g, &dec, &t, &a, OrderKind::SnakeLike, true, &rate).unwrap();
        assert!(again.steps.is_empty());

        let panned = t.with_direction(Direction::new(0.25, 0.0));
        let p2 = plan_navigation(&g, &dec, &panned, &a, OrderKind::SnakeLike, true, &rate).unwrap();
        let fp2 = viewport_footprint(&panned, 512, 256, 32).unwrap();
        let expect: Vec<usize> = fp2.iter().copied().filter(|&b| !dec[b]).collect();
        let mut got: Vec<usize> = p2.steps.iter().map(|s| s.block).collect();
        got.sort_unstable();
        assert_eq!(got, expect);
        assert!(!got.is_empty());
        assert!(p2.steps.iter().all(|s| s.context != Context::Empty));
    }

    #[test]
    fn navigation_teleport_starts_at_access_block() {
        let g = grid();
        let t = ViewportSpec::default_at(Direction::new(0.0, 0.0));
        let far = t.with_direction(Direction::new(3.0, 0.0));
        let fp = viewport_footprint(&far, 512, 256, 32).unwrap();
        let a = AccessBlockSet::new(vec![fp[fp.len() / 2]], crate::placement::AccessStrategy::Fixed, g.len());
        let mut dec = vec![false; g.len()];
        for b in viewport_footprint(&t, 512, 256, 32).unwrap() {
            dec[b] = true;
        }
        let p = plan_navigation(&g, &dec, &far, &a, OrderKind::SnakeLike, true, &|_, _| 1).unwrap();
        assert_eq!(p.steps[0], PlannedBlock { block: fp[fp.len() / 2], context: Context::Empty });
    }

    #[test]
    fn navigation_bridges_isolated_groups() {
        let g = BlockGrid::new(256, 128, 32).unwrap();
        let comp = vec![0usize];
        let path = bridge(&g, &comp, &|b| b == 18).unwrap();
        assert_eq!(*path.last().unwrap(), 18);
        // two columns and two rows away: three blocks in between plus the goal
        assert_eq!(path.len(), 4);
        assert!(g.neighbors(path[0]).contains(&0));
    }

    fn random_region(seed: u64, g: &BlockGrid) -> (Vec<usize>, usize) {
        let mut s = seed | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        let start = (next() % g.len() as u64) as usize;
        let target = 2 + (next() % 30) as usize;
        let mut set = vec![start];
        while set.len() < target {
            let b = set[(next() % set.len() as u64) as usize];
            let nbs = g.neighbors(b);
            let n = nbs[(next() % nbs.len() as u64) as usize];
            if !set.contains(&n) {
                set.push(n);
            }
        }
        (set, start)
    }

    #[test]
    fn greedy_count_score_at_least_snake() {
        let g = grid();
        for seed in 0..100u64 {
            let (j, s) = random_region(seed * 7919 + 3, &g);
            let none = vec![false; g.len()];
            let gc = greedy_count(&g, &j, s, true).unwrap();
            let sn = snake_like(&g, &j, s, true).unwrap();
            assert!(neighbor_count_score(&g, &gc.blocks, &none) >= neighbor_count_score(&g, &sn.blocks, &none));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn orders_are_decodable_permutations(seed in any::<u64>(), h in any::<bool>()) {
            let g = grid();
            let (j, s) = random_region(seed, &g);
            let mut sorted = j.clone();
            sorted.sort_unstable();
            for o in [
                snake_like(&g, &j, s, h).unwrap(),
                greedy_count(&g, &j, s, h).unwrap(),
                greedy_rate(&g, &j, s, &|b, c| (b * 31 + c.id() as usize * 7) % 50).unwrap(),
            ] {
                prop_assert_eq!(o.blocks[0], s);
                prop_assert!(decodable(&g, &o.blocks));
                let mut got = o.blocks.clone();
                got.sort_unstable();
                prop_assert_eq!(&got, &sorted);
            }
        }

        #[test]
        fn navigation_covers_missing_blocks(lon in -3.1f64..3.1, lat in -1.4f64..1.4, lon2 in -3.1f64..3.1, lat2 in -1.4f64..1.4) {
            let g = grid();
            let t = ViewportSpec::default_at(Direction::new(lon, lat));
            let a = crate::placement::place_fixed(&g, &t, crate::placement::Sweep::for_template(&t)).unwrap();
            let mut dec = vec![false; g.len()];
            for spec in [t, t.with_direction(Direction::new(lon2, lat2))] {
                let p = plan_navigation(&g, &dec, &spec, &a, OrderKind::SnakeLike, true, &|_, _| 1).unwrap();
                for (i, st) in p.steps.iter().enumerate() {
                    prop_assert!(!dec[st.block]);
                    if st.context == Context::Empty {
                        prop_assert!(a.contains(st.block));
                    } else {
                        prop_assert!(st.context.required_blocks(&g, st.block).unwrap().iter().all(|&n| dec[n]), "step {}", i);
                    }
                    dec[st.block] = true;
                }
                for b in p.footprint {
                    prop_assert!(dec[b]);
                }
            }
        }
    }
}
