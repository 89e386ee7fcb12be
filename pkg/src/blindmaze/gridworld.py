"""Maze environment: ASCII maze/mask loading, one-hot position observations,
four movement actions with wall/step/goal rewards, blindness masks, and the
shortest-path / value-iteration oracles.

Cells are (row, col) with origin at the top-left; the one-hot index of a cell
is row * width + col (row-major over the full grid, walls included).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources

import numpy as np

# Action ids, fixed order. Ties in greedy selection break toward lower ids.
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ("up", "down", "left", "right")
N_ACTIONS = 4

REWARD_STEP = -0.01
REWARD_WALL = -0.02
REWARD_GOAL = 1.0

DEFAULT_MAX_EPISODE_STEPS = 150


class MazeLoadError(ValueError):
    """Malformed maze or mask file."""


@dataclass(frozen=True)
class MazeSpec:
    name: str
    width: int
    height: int
    walls: frozenset
    start: tuple
    goal: tuple
    max_episode_steps: int = DEFAULT_MAX_EPISODE_STEPS

    @property
    def obs_dim(self):
        return self.width * self.height

    def cell_index(self, cell):
        return cell[0] * self.width + cell[1]

    def in_bounds(self, cell):
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell):
        return self.in_bounds(cell) and cell not in self.walls

    def free_cells(self):
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if (r, c) not in self.walls]


@dataclass(frozen=True)
class Mask:
    name: str
    cells: frozenset


def load_maze(text, name="maze"):
    """Parse an ASCII maze ('#' wall, '.' free, 'S' start, 'G' goal) and validate it."""
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MazeLoadError(f"{name}: empty maze")
    width = len(lines[0])
    walls, start, goal = set(), None, None
    for r, line in enumerate(lines):
        if "\t" in line:
            raise MazeLoadError(f"{name}: tab character at line {r + 1}, column {line.index(chr(9)) + 1}")
        if len(line) != width:
            raise MazeLoadError(f"{name}: line {r + 1} has length {len(line)}, expected {width}")
        for c, ch in enumerate(line):
            if ch == "#":
                walls.add((r, c))
            elif ch == "S":
                if start is not None:
                    raise MazeLoadError(f"{name}: duplicate start at line {r + 1}, column {c + 1}")
                start = (r, c)
            elif ch == "G":
                if goal is not None:
                    raise MazeLoadError(f"{name}: duplicate goal at line {r + 1}, column {c + 1}")
                goal = (r, c)
            elif ch != ".":
                raise MazeLoadError(f"{name}: unknown character {ch!r} at line {r + 1}, column {c + 1}")
    if start is None:
        raise MazeLoadError(f"{name}: missing start cell 'S'")
    if goal is None:
        raise MazeLoadError(f"{name}: missing goal cell 'G'")
    maze = MazeSpec(name=name, width=width, height=len(lines),
                    walls=frozenset(walls), start=start, goal=goal)
    if bfs_optimal_length(maze) is None:
        raise MazeLoadError(f"{name}: goal unreachable from start")
    return maze


def load_mask(text, maze, name="mask"):
    """Parse a mask overlay ('B' masked, '.' elsewhere) matching the maze grid."""
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    if len(lines) != maze.height:
        raise MazeLoadError(f"{name}: mask has {len(lines)} rows, maze {maze.name} has {maze.height}")
    cells = set()
    for r, line in enumerate(lines):
        if "\t" in line:
            raise MazeLoadError(f"{name}: tab character at line {r + 1}, column {line.index(chr(9)) + 1}")
        if len(line) != maze.width:
            raise MazeLoadError(f"{name}: line {r + 1} has length {len(line)}, expected {maze.width}")
        for c, ch in enumerate(line):
            if ch == "B":
                cells.add((r, c))
            elif ch != ".":
                raise MazeLoadError(f"{name}: unknown character {ch!r} at line {r + 1}, column {c + 1}")
    return Mask(name=name, cells=frozenset(cells))


def step_cell(maze, cell, action):
    """Pure transition: returns (next_cell, reward, reached_goal)."""
    dr, dc = ACTION_DELTAS[action]
    nxt = (cell[0] + dr, cell[1] + dc)
    if not maze.is_free(nxt):
        return cell, REWARD_WALL, False
    if nxt == maze.goal:
        return nxt, REWARD_GOAL, True
    return nxt, REWARD_STEP, False


def observe(maze, cell, masks=()):
    """One-hot observation of the cell, or None when any active mask hides it."""
    for mask in masks:
        if cell in mask.cells:
            return None
    vec = np.zeros(maze.obs_dim)
    vec[maze.cell_index(cell)] = 1.0
    return vec


class Episode:
    """Stateful episode wrapper enforcing the step cap and post-done errors."""

    def __init__(self, maze, max_steps=None):
        self.maze = maze
        self.max_steps = maze.max_episode_steps if max_steps is None else max_steps
        self.cell = maze.start
        self.steps = 0
        self.reached_goal = False
        self.truncated = False

    @property
    def done(self):
        return self.reached_goal or self.truncated

    def step(self, action):
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        self.cell, reward, self.reached_goal = step_cell(self.maze, self.cell, action)
        self.steps += 1
        if not self.reached_goal and self.steps >= self.max_steps:
            self.truncated = True
        return self.cell, reward, self.done


def bfs_optimal_length(maze):
    """Exact shortest start-to-goal step count, or None if unreachable."""
    dist = {maze.start: 0}
    queue = deque([maze.start])
    while queue:
        cell = queue.popleft()
        if cell == maze.goal:
            return dist[cell]
        for action in range(N_ACTIONS):
            dr, dc = ACTION_DELTAS[action]
            nxt = (cell[0] + dr, cell[1] + dc)
            if maze.is_free(nxt) and nxt not in dist:
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return None


def bfs_optimal_path(maze):
    """A canonical shortest path (list of cells, start included), breaking ties
    by the fixed action order."""
    parent = {maze.start: None}
    queue = deque([maze.start])
    while queue:
        cell = queue.popleft()
        if cell == maze.goal:
            path = [cell]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for action in range(N_ACTIONS):
            dr, dc = ACTION_DELTAS[action]
            nxt = (cell[0] + dr, cell[1] + dc)
            if maze.is_free(nxt) and nxt not in parent:
                parent[nxt] = cell
                queue.append(nxt)
    raise MazeLoadError(f"{maze.name}: goal unreachable from start")


def prefix_mask(maze, k):
    """Mask covering the first k cells after the start on the canonical optimal path."""
    length = bfs_optimal_length(maze)
    if not 0 <= k <= length:
        raise ValueError(f"prefix mask length {k} out of range [0, {length}]")
    path = bfs_optimal_path(maze)
    return Mask(name=f"prefix{k}", cells=frozenset(path[1 : k + 1]))


def masked_path_runs(maze, masks):
    """Lengths of the maximal consecutive masked runs along the canonical optimal
    path, one entry per mask (0 when the path never enters the mask)."""
    path = bfs_optimal_path(maze)
    runs = {}
    for mask in masks:
        best = cur = 0
        for cell in path[1:]:
            cur = cur + 1 if cell in mask.cells else 0
            best = max(best, cur)
        runs[mask.name] = best
    return runs


def value_iteration(maze, gamma=0.99, tol=1e-10, max_iters=100000):
    """Tabular optimal state values over free cells; the goal is absorbing with V=0."""
    cells = maze.free_cells()
    values = {cell: 0.0 for cell in cells}
    for _ in range(max_iters):
        delta = 0.0
        for cell in cells:
            if cell == maze.goal:
                continue
            best = -np.inf
            for action in range(N_ACTIONS):
                nxt, reward, reached = step_cell(maze, cell, action)
                q = reward + (0.0 if reached else gamma * values[nxt])
                best = max(best, q)
            delta = max(delta, abs(best - values[cell]))
            values[cell] = best
        if delta < tol:
            break
    return values


def greedy_policy_length(maze, values, gamma=0.99, max_steps=None):
    """Episode length when following the value-greedy policy from the start."""
    cap = maze.max_episode_steps if max_steps is None else max_steps
    cell = maze.start
    for step in range(1, cap + 1):
        best_q, best_action = -np.inf, 0
        for action in range(N_ACTIONS):
            nxt, reward, reached = step_cell(maze, cell, action)
            q = reward + (0.0 if reached else gamma * values[nxt])
            if q > best_q:
                best_q, best_action = q, action
        cell, _, reached = step_cell(maze, cell, best_action)
        if reached:
            return step
    return cap


BUILTIN_MAZES = ("benchmark", "zigzag", "open5")
BUILTIN_MASKS = ("benchmark_room", "benchmark_zigzag", "benchmark_forks")


def _data_text(filename):
    return resources.files("blindmaze").joinpath("mazes", filename).read_text()


def builtin_maze(name):
    if name not in BUILTIN_MAZES:
        raise MazeLoadError(f"unknown builtin maze {name!r}; have {', '.join(BUILTIN_MAZES)}")
    return load_maze(_data_text(f"{name}.maze"), name=name)


def builtin_mask(name, maze):
    if name not in BUILTIN_MASKS:
        raise MazeLoadError(f"unknown builtin mask {name!r}; have {', '.join(BUILTIN_MASKS)}")
    return load_mask(_data_text(f"{name}.mask"), maze, name=name)


def benchmark_masks(maze):
    return [builtin_mask(name, maze) for name in BUILTIN_MASKS]


def resolve_maze(spec):
    """Load a maze from a path, or fall back to a builtin name like 'zigzag'
    (a trailing '.maze' is ignored for builtin lookup)."""
    import os

    if os.path.exists(spec):
        with open(spec) as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(spec))[0]
        return load_maze(text, name=name)
    name = spec[:-5] if spec.endswith(".maze") else spec
    if name in BUILTIN_MAZES:
        return builtin_maze(name)
    raise MazeLoadError(f"maze file not found and not a builtin: {spec!r}")


def resolve_mask(spec, maze):
    import os

    if os.path.exists(spec):
        with open(spec) as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(spec))[0]
        return load_mask(text, maze, name=name)
    name = spec[:-5] if spec.endswith(".mask") else spec
    if name in BUILTIN_MASKS:
        return builtin_mask(name, maze)
    raise MazeLoadError(f"mask file not found and not a builtin: {spec!r}")
