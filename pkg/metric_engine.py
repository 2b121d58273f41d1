"""
度量引擎模块
网络最短路径距离、圆周点计数（几何校正因子）与到边界的距离
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from core_data_structures import (
    RELATIVE_TOLERANCE, LinearNetwork, NetworkLocation, locations_to_arrays,
    terminal_vertices
)
from exceptions import NoBorder, NonPositiveRadius


def vertex_distance_table(network: LinearNetwork) -> np.ndarray:
    """
    顶点间最短路径距离表

    对每个顶点做一次 Dijkstra，复杂度 O(V·E log V)；平行边取最短者，不连通为 inf
    """
    a = np.minimum(network.segments[:, 0], network.segments[:, 1])
    b = np.maximum(network.segments[:, 0], network.segments[:, 1])
    keys = a * network.n_vertices + b
    order = np.lexsort((network.segment_lengths, keys))
    first = np.ones(len(order), dtype=bool)
    first[1:] = keys[order][1:] != keys[order][:-1]
    chosen = order[first]

    n = network.n_vertices
    graph = csr_matrix((network.segment_lengths[chosen], (a[chosen], b[chosen])), shape=(n, n))
    return shortest_path(graph, method="D", directed=False)


class MetricEngine:
    """
    网络上的最短路径度量

    站点（数据点与哑点）以 (线段, 偏移) 数组保存；构造后不可变
    """

    def __init__(self, network: LinearNetwork, segments: np.ndarray, offsets: np.ndarray,
                 vertex_distances: Optional[np.ndarray] = None):
        self.network = network
        self.site_segments = np.asarray(segments, dtype=np.int64).reshape(-1)
        self.site_offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if self.site_segments.shape != self.site_offsets.shape:
            raise ValueError("站点线段与偏移数组长度不一致")

        lengths = network.segment_lengths[self.site_segments]
        if np.any(self.site_offsets < -network.tolerance()) or \
                np.any(self.site_offsets > lengths + network.tolerance()):
            raise ValueError("站点偏移超出所在线段长度")
        self.site_offsets = np.clip(self.site_offsets, 0.0, lengths)

        if vertex_distances is None:
            vertex_distances = vertex_distance_table(network)
            logger.debug(f"顶点距离表完成: {network.n_vertices} 个顶点")
        self.vertex_distances = vertex_distances

        # 站点到所在线段两端点的弧长
        self.site_to_vertex = np.column_stack([self.site_offsets, lengths - self.site_offsets])
        self.tolerance = RELATIVE_TOLERANCE * network.total_length
        # 全部站点的点对表 (最大距离, u, x, 距离, ∇)，只保留半径最大的一份；重标记的模式共享同一引擎
        self.pair_table: Optional[Tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def n_sites(self) -> int:
        return len(self.site_segments)

    def with_sites(self, segments: np.ndarray, offsets: np.ndarray) -> 'MetricEngine':
        """用新的站点集合构造引擎，复用顶点距离表"""
        return MetricEngine(self.network, segments, offsets, self.vertex_distances)

    def extended(self, segments: np.ndarray, offsets: np.ndarray) -> 'MetricEngine':
        """在现有站点之后追加站点"""
        return self.with_sites(np.concatenate([self.site_segments, segments]),
                               np.concatenate([self.site_offsets, offsets]))

    def location(self, site: int) -> NetworkLocation:
        return NetworkLocation(int(self.site_segments[site]), float(self.site_offsets[site]))

    def site_vertex_distances(self, sites: Sequence[int]) -> np.ndarray:
        """站点到所有顶点的最短路径距离，形状 (len(sites), V)"""
        sites = np.asarray(sites, dtype=np.int64)
        ends = self.network.segments[self.site_segments[sites]]
        along = self.site_to_vertex[sites]
        via_start = along[:, [0]] + self.vertex_distances[ends[:, 0]]
        via_end = along[:, [1]] + self.vertex_distances[ends[:, 1]]
        return np.minimum(via_start, via_end)

    def cross_distances(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """行站点与列站点之间的距离矩阵"""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size))

        to_vertex = self.site_vertex_distances(rows)
        col_ends = self.network.segments[self.site_segments[cols]]
        col_along = self.site_to_vertex[cols]
        result = np.minimum(to_vertex[:, col_ends[:, 0]] + col_along[:, 0],
                            to_vertex[:, col_ends[:, 1]] + col_along[:, 1])

        same = self.site_segments[rows][:, None] == self.site_segments[cols][None, :]
        direct = np.abs(self.site_offsets[rows][:, None] - self.site_offsets[cols][None, :])
        result = np.where(same, np.minimum(result, direct), result)
        result[rows[:, None] == cols[None, :]] = 0.0
        return result

    def distance(self, a: int, b: int) -> float:
        return float(self.cross_distances([a], [b])[0, 0])

    def pairwise_distances(self, sites: Optional[Sequence[int]] = None) -> np.ndarray:
        """对称距离矩阵，对角线为零"""
        if sites is None:
            sites = np.arange(self.n_sites)
        matrix = self.cross_distances(sites, sites)
        # 数值上强制对称
        return np.minimum(matrix, matrix.T)

    def pairs_within(self, max_distance: float) -> Tuple[np.ndarray, ...]:
        """
        全部站点间距离不超过 max_distance 的有序点对 (u, x)，u≠x，及校正因子 ∇

        ∇ 只依赖 u 与距离，与类型和标记无关；表按需扩大半径，较小半径从中筛选
        """
        table = self.pair_table
        if table is None or table[0] < max_distance:
            sites = np.arange(self.n_sites)
            distances = self.cross_distances(sites, sites)
            keep = np.isfinite(distances) & (distances <= max_distance)
            np.fill_diagonal(keep, False)
            row_index, col_index = np.nonzero(keep)
            distance = distances[row_index, col_index]

            nabla = np.empty(len(distance))
            floor = 4.0 * self.tolerance
            for u in np.unique(row_index):
                selected = row_index == u
                counts = self.perimeter_counts(int(u), np.maximum(distance[selected], floor))
                nabla[selected] = 1.0 / np.maximum(counts, 1)

            table = (float(max_distance), row_index, col_index, distance, nabla)
            self.pair_table = table
            logger.debug(f"网络点对表: {len(distance)} 对, 最大距离 {max_distance:.6g}")

        _, first, second, distance, nabla = table
        if table[0] == max_distance:
            return first, second, distance, nabla
        keep = distance <= max_distance
        return first[keep], second[keep], distance[keep], nabla[keep]

    def _perimeter_pieces(self, u: int) -> Tuple[np.ndarray, ...]:
        """
        以 u 为中心把网络拆成若干子段，每段给出 (起点距离, 终点距离, 长度, 起点顶点, 终点顶点)

        u 所在线段被拆成两段，起点为 u 本身（顶点编号 -1，不参与去重）
        """
        network = self.network
        to_vertex = self.site_vertex_distances([u])[0]
        own = int(self.site_segments[u])
        start_vertex, end_vertex = network.segments[own]
        t, rest = self.site_to_vertex[u]

        others = np.arange(network.n_segments) != own
        ends = network.segments[others]
        d_start = [to_vertex[ends[:, 0]]]
        d_end = [to_vertex[ends[:, 1]]]
        lengths = [network.segment_lengths[others]]
        start_ids = [ends[:, 0]]
        end_ids = [ends[:, 1]]

        for length, vertex in ((t, start_vertex), (rest, end_vertex)):
            if length > 0:
                d_start.append(np.array([0.0]))
                d_end.append(np.array([to_vertex[vertex]]))
                lengths.append(np.array([length]))
                start_ids.append(np.array([-1]))
                end_ids.append(np.array([vertex]))

        d_start = np.concatenate(d_start)
        d_end = np.concatenate(d_end)
        reachable = np.isfinite(d_start) | np.isfinite(d_end)
        return (d_start[reachable], d_end[reachable], np.concatenate(lengths)[reachable],
                np.concatenate(start_ids)[reachable], np.concatenate(end_ids)[reachable])

    def perimeter_counts(self, u: int, radii: np.ndarray) -> np.ndarray:
        """
        对一组半径计算 m(u, r)：网络上与 u 距离恰为 r 的位置个数

        每个子段上距离函数为 min(起点距离 + s, 终点距离 + 长度 - s)，
        升支与降支各至多一个解；落在顶点上的解按顶点去重
        """
        radii = np.asarray(radii, dtype=float).reshape(-1)
        if np.any(radii <= 0):
            raise NonPositiveRadius(f"半径必须为正，最小值为 {radii.min()}")

        d_start, d_end, lengths, start_ids, end_ids = self._perimeter_pieces(u)
        tol = self.tolerance
        r = radii[:, None]

        with np.errstate(invalid="ignore"):
            peak = (d_end + lengths - d_start) / 2.0
            rising = r - d_start
            falling = d_end + lengths - r
            in_rising = (rising >= -tol) & (rising <= lengths + tol) & (rising <= peak + tol)
            in_falling = (falling >= -tol) & (falling <= lengths + tol) & (falling >= peak - tol)
            # 两支在峰顶重合时只算一次
            in_falling &= ~(in_rising & (np.abs(rising - falling) <= tol))

        counts = np.zeros(len(radii), dtype=np.int64)
        vertex_hits = []
        n_keys = self.network.n_vertices + 1
        for position, valid in ((rising, in_rising), (falling, in_falling)):
            at_start = valid & (position <= tol) & (start_ids >= 0)
            at_end = valid & (position >= lengths - tol) & ~at_start
            counts += (valid & ~at_start & ~at_end).sum(axis=1)
            for hits, ids in ((at_start, start_ids), (at_end, end_ids)):
                row, col = np.nonzero(hits)
                vertex_hits.append(row * n_keys + ids[col])

        keys = np.unique(np.concatenate(vertex_hits))
        counts += np.bincount(keys // n_keys, minlength=len(radii))
        return counts

    def disc_perimeter_count(self, u: int, r: float) -> int:
        return int(self.perimeter_counts(u, np.array([r]))[0])

    def correction_matrix(self, rows: Sequence[int], cols: Sequence[int],
                          distances: Optional[np.ndarray] = None) -> np.ndarray:
        """
        几何校正因子矩阵 1/m(u, d_L(u, x))

        x 本身就在圆周上，计数小于1时按1处理；距离为 inf 的对给 0
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if distances is None:
            distances = self.cross_distances(rows, cols)

        result = np.zeros(distances.shape)
        floor = 4.0 * self.tolerance
        for index, u in enumerate(rows):
            finite = np.isfinite(distances[index])
            if not finite.any():
                continue
            radii = np.maximum(distances[index, finite], floor)
            counts = np.maximum(self.perimeter_counts(int(u), radii), 1)
            result[index, finite] = 1.0 / counts
        return result

    def distance_to_border(self, u: int) -> float:
        """到最近度为1顶点的最短路径距离"""
        return float(self.border_distances([u])[0])

    def border_distances(self, sites: Optional[Sequence[int]] = None) -> np.ndarray:
        terminals = terminal_vertices(self.network)
        if not terminals:
            raise NoBorder("网络没有度为1的端点，无法定义边界距离")
        if sites is None:
            sites = np.arange(self.n_sites)
        return self.site_vertex_distances(sites)[:, terminals].min(axis=1)

    def diameter(self) -> float:
        """顶点间有限最短路径距离的最大值（树形网络上即网络直径）"""
        finite = self.vertex_distances[np.isfinite(self.vertex_distances)]
        return float(finite.max()) if finite.size else 0.0


def build_metric_engine(network: LinearNetwork, sites: Sequence[NetworkLocation]) -> MetricEngine:
    segments, offsets = locations_to_arrays(sites)
    return MetricEngine(network, segments, offsets)


if __name__ == "__main__":
    from core_data_structures import build_network

    network = build_network([(0, 0), (100, 0)], [(0, 1)])
    engine = build_metric_engine(network, [NetworkLocation(0, 50.0), NetworkLocation(0, 80.0)])
    print(f"d_L = {engine.distance(0, 1)}")
    for radius in (10.0, 50.0, 60.0):
        print(f"m(u, {radius}) = {engine.disc_perimeter_count(0, radius)}")
