#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use amaze_core::rng::Pcg32;
use amaze_core::{Cell, Direction, Glyph, Maze, MazeClass, MazeSpec, StartCorner};

/// Compares `actual` with `tests/golden/<name>`. A missing file is written
/// once and then frozen; set `AMAZE_UPDATE_GOLDEN=1` to rewrite.
pub fn golden(name: &str, actual: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("AMAZE_UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap();
    if expected != actual {
        panic!(
            "golden mismatch for {name}\n--- expected\n{}\n--- actual\n{}",
            String::from_utf8_lossy(&expected),
            String::from_utf8_lossy(actual)
        );
    }
}

/// Spec drawn from all five classes, sizes 2..=24 and every start corner.
pub fn random_spec(rng: &mut Pcg32) -> MazeSpec {
    let class = MazeClass::ALL[rng.below(5) as usize];
    let mut base = MazeSpec::new(2 + rng.below(23), 2 + rng.below(23), u64::from(rng.next_u32()));
    base.start_corner = StartCorner::ALL[rng.below(4) as usize];
    let mut spec = class.apply(&base);
    if spec.p_lure > 0.0 {
        spec.p_lure = 0.1 + 0.9 * rng.unit();
        spec.lure_glyphs = vec![Glyph::LURE, Glyph::new(0.2).unwrap()];
    }
    if spec.p_trap > 0.0 {
        spec.p_trap = 0.1 + 0.9 * rng.unit();
    }
    spec
}

pub fn random_specs(n: usize, seed: u64) -> Vec<MazeSpec> {
    let mut rng = Pcg32::new(seed, 99);
    (0..n).map(|_| random_spec(&mut rng)).collect()
}

/// Neighbors reachable through open walls, read straight off the wall masks.
fn open_neighbors(maze: &Maze, c: Cell) -> Vec<Cell> {
    let mut out = Vec::new();
    let (x, y) = (c.x as i64, c.y as i64);
    for (d, dx, dy) in [(Direction::East, 1, 0), (Direction::North, 0, 1), (Direction::West, -1, 0), (Direction::South, 0, -1)] {
        let (nx, ny) = (x + dx, y + dy);
        if nx < 0 || ny < 0 || nx >= maze.width() as i64 || ny >= maze.height() as i64 {
            continue;
        }
        if !maze.has_wall(c, d) {
            out.push(Cell::new(nx as u32, ny as u32));
        }
    }
    out
}

/// Flood fill from `from`: distance to every cell, `None` when unreachable.
pub fn flood(maze: &Maze, from: Cell) -> Vec<Option<usize>> {
    let w = maze.width() as usize;
    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    let mut dist = vec![None; w * maze.height() as usize];
    dist[idx(from)] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)].unwrap();
        for n in open_neighbors(maze, c) {
            if dist[idx(n)].is_none() {
                dist[idx(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Number of open internal walls, each counted once.
pub fn open_edges(maze: &Maze) -> usize {
    let mut n = 0;
    for y in 0..maze.height() {
        for x in 0..maze.width() {
            let c = Cell::new(x, y);
            n += open_neighbors(maze, c)
                .into_iter()
                .filter(|o| (o.y, o.x) > (c.y, c.x))
                .count();
        }
    }
    n
}

/// Wall masks must agree between neighbors and close the outer border.
pub fn walls_consistent(maze: &Maze) -> bool {
    for y in 0..maze.height() {
        for x in 0..maze.width() {
            let c = Cell::new(x, y);
            for d in Direction::ALL {
                match maze.neighbor(c, d) {
                    None => {
                        if !maze.has_wall(c, d) {
                            return false;
                        }
                    }
                    Some(n) => {
                        if maze.has_wall(c, d) != maze.has_wall(n, d.opposite()) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

fn step_dir(from: Cell, to: Cell) -> Option<Direction> {
    let dx = to.x as i64 - from.x as i64;
    let dy = to.y as i64 - from.y as i64;
    match (dx, dy) {
        (1, 0) => Some(Direction::East),
        (0, 1) => Some(Direction::North),
        (-1, 0) => Some(Direction::West),
        (0, -1) => Some(Direction::South),
        _ => None,
    }
}

/// Every structural and signage rule a generated maze must satisfy, checked
/// without going through the generator's own helpers. Returns the broken
/// rules.
pub fn maze_violations(maze: &Maze) -> Vec<String> {
    use amaze_core::SignKind;
    let mut bad = Vec::new();
    let (w, h) = (maze.width(), maze.height());
    let (s, g) = (maze.start(), maze.goal());
    if !(s.x == 0 || s.x == w - 1) || !(s.y == 0 || s.y == h - 1) {
        bad.push(format!("start {s} is not a corner"));
    }
    if g.x != w - 1 - s.x || g.y != h - 1 - s.y {
        bad.push(format!("goal {g} is not opposite start {s}"));
    }
    if !walls_consistent(maze) {
        bad.push("wall masks disagree between neighbors".into());
    }

    // Spanning tree before any blocking: the unicursive twin is the same
    // spec without the flag.
    let tree = if maze.spec().unicursive {
        let mut spec = maze.spec().clone();
        spec.unicursive = false;
        Maze::generate(&spec).unwrap().rotate(maze.rotation())
    } else {
        maze.clone()
    };
    let cells = (w * h) as usize;
    if open_edges(&tree) != cells - 1 {
        bad.push(format!("{} open edges, expected {}", open_edges(&tree), cells - 1));
    }
    if flood(&tree, tree.start()).iter().any(Option::is_none) {
        bad.push("tree does not reach every cell".into());
    }

    let path = maze.optimal_path();
    let dist = flood(maze, s);
    let gi = (g.y * w + g.x) as usize;
    if path.len() < 2 || path[0] != s || *path.last().unwrap() != g {
        bad.push("path does not run from start to goal".into());
    }
    if dist[gi].map(|d| d + 1) != Some(path.len()) {
        bad.push(format!("path length {} differs from flood distance {:?}", path.len(), dist[gi]));
    }
    for pair in path.windows(2) {
        match step_dir(pair[0], pair[1]) {
            Some(d) if !maze.has_wall(pair[0], d) => {}
            _ => bad.push(format!("path step {} -> {} is not an open move", pair[0], pair[1])),
        }
    }
    if maze.spec().unicursive {
        // Everything reachable lies on the path.
        let reachable = dist.iter().filter(|d| d.is_some()).count();
        if reachable != path.len() {
            bad.push(format!("unicursive maze reaches {reachable} cells off a {}-cell path", path.len()));
        }
    }

    let mut on_path = vec![false; cells];
    for c in path {
        on_path[(c.y * w + c.x) as usize] = true;
    }
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            if (!on_path[(y * w + x) as usize] || c == g) && maze.sign(c).is_some() {
                bad.push(format!("sign off the path or on the goal at {c}"));
            }
        }
    }
    let mut intersections = 0;
    for i in 0..path.len() - 1 {
        let c = path[i];
        let origin = if i > 0 { step_dir(c, path[i - 1]) } else { None };
        let forward = step_dir(c, path[i + 1]).unwrap();
        let exits: Vec<Direction> = Direction::ALL
            .into_iter()
            .filter(|&d| !maze.has_wall(c, d) && Some(d) != origin)
            .collect();
        let sign = maze.sign(c);
        if exits.len() >= 2 {
            intersections += 1;
            match sign {
                Some(sg) if sg.kind == SignKind::Clue => {
                    if sg.direction != forward {
                        bad.push(format!("clue at {c} does not follow the path"));
                    }
                    if !maze.spec().clue_glyphs.contains(&sg.glyph) {
                        bad.push(format!("clue glyph at {c} not in the spec"));
                    }
                }
                Some(sg) if sg.kind == SignKind::Trap => {
                    if sg.direction == forward || !exits.contains(&sg.direction) {
                        bad.push(format!("trap at {c} does not point into an open side branch"));
                    }
                    if !maze.spec().trap_glyphs.contains(&sg.glyph) {
                        bad.push(format!("trap glyph at {c} not in the spec"));
                    }
                }
                other => bad.push(format!("intersection {c} carries {other:?}")),
            }
        } else if let Some(sg) = sign {
            if sg.kind != SignKind::Lure {
                bad.push(format!("corridor {c} carries a {:?}", sg.kind));
            } else {
                let backward = Some(sg.direction) == origin;
                if !backward && !maze.has_wall(c, sg.direction) {
                    bad.push(format!("lure at {c} points at an open forward move"));
                }
                if !maze.spec().lure_glyphs.contains(&sg.glyph) {
                    bad.push(format!("lure glyph at {c} not in the spec"));
                }
            }
        }
    }
    if maze.spec().unicursive && intersections != 0 {
        bad.push(format!("unicursive maze has {intersections} intersections"));
    }
    bad
}
