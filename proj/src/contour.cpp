#include "nnmstab/contour.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

namespace nnmstab {

namespace {

struct Segment {
    long e0, e1;
    GridPoint p0, p1;
};

}  // namespace

std::vector<Polyline> zero_contours(const Mat& F) {
    const Eigen::Index R = F.rows();
    const Eigen::Index C = F.cols();
    std::vector<Polyline> out;
    if (R < 2 || C < 2) return out;

    // edge keys: 2 * (i * C + j) runs along rows (i -> i+1), +1 along columns (j -> j+1)
    auto key_row = [C](Eigen::Index i, Eigen::Index j) { return 2 * static_cast<long>(i * C + j); };
    auto key_col = [C](Eigen::Index i, Eigen::Index j) { return 2 * static_cast<long>(i * C + j) + 1; };
    auto cross = [](double vp, double vq) { return vp / (vp - vq); };
    auto pos = [](double v) { return v >= 0.0; };

    std::vector<Segment> segs;
    for (Eigen::Index i = 0; i + 1 < R; ++i) {
        for (Eigen::Index j = 0; j < C; ++j) {
            const Eigen::Index j1 = (j + 1) % C;
            const double a = F(i, j), b = F(i + 1, j), c = F(i + 1, j1), d = F(i, j1);
            const double y0 = static_cast<double>(j);
            // edges around the cell: a-b, b-c, c-d, d-a
            std::array<long, 4> key{key_row(i, j), key_col(i + 1, j), key_row(i, j1), key_col(i, j)};
            std::array<bool, 4> hit{pos(a) != pos(b), pos(b) != pos(c), pos(d) != pos(c), pos(a) != pos(d)};
            std::array<GridPoint, 4> pt{};
            if (hit[0]) pt[0] = {i + cross(a, b), y0};
            if (hit[1]) pt[1] = {static_cast<double>(i + 1), y0 + cross(b, c)};
            if (hit[2]) pt[2] = {i + cross(d, c), y0 + 1.0};
            if (hit[3]) pt[3] = {static_cast<double>(i), y0 + cross(a, d)};

            std::vector<int> e;
            for (int k = 0; k < 4; ++k)
                if (hit[k]) e.push_back(k);
            auto add = [&](int p, int q) { segs.push_back({key[p], key[q], pt[p], pt[q]}); };
            if (e.size() == 2) {
                add(e[0], e[1]);
            } else if (e.size() == 4) {
                const double centre = 0.25 * (a + b + c + d);
                if (pos(centre) == pos(a)) {
                    add(0, 1);
                    add(2, 3);
                } else {
                    add(3, 0);
                    add(1, 2);
                }
            }
        }
    }

    std::unordered_map<long, std::vector<int>> by_edge;
    for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
        by_edge[segs[s].e0].push_back(s);
        by_edge[segs[s].e1].push_back(s);
    }
    std::vector<bool> used(segs.size(), false);

    auto wrap = [C](GridPoint p) {
        if (p.y >= static_cast<double>(C)) p.y -= static_cast<double>(C);
        return p;
    };

    auto walk = [&](int start, long from_edge) {
        Polyline pl;
        int s = start;
        long edge = from_edge;
        const Segment& s0 = segs[s];
        pl.points.push_back(wrap(edge == s0.e0 ? s0.p0 : s0.p1));
        while (true) {
            used[s] = true;
            const Segment& sg = segs[s];
            const long next_edge = edge == sg.e0 ? sg.e1 : sg.e0;
            pl.points.push_back(wrap(edge == sg.e0 ? sg.p1 : sg.p0));
            int nxt = -1;
            for (int cand : by_edge[next_edge])
                if (!used[cand]) nxt = cand;
            if (nxt < 0) {
                const auto& owners = by_edge[next_edge];
                pl.closed = owners.size() == 2 && next_edge == from_edge;
                if (next_edge == from_edge) pl.closed = true;
                break;
            }
            s = nxt;
            edge = next_edge;
        }
        if (pl.closed) pl.points.pop_back();
        return pl;
    };

    // open chains start at edges owned by a single segment (grid boundary)
    for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
        if (used[s]) continue;
        if (by_edge[segs[s].e0].size() == 1)
            out.push_back(walk(s, segs[s].e0));
        else if (by_edge[segs[s].e1].size() == 1)
            out.push_back(walk(s, segs[s].e1));
    }
    for (int s = 0; s < static_cast<int>(segs.size()); ++s)
        if (!used[s]) out.push_back(walk(s, segs[s].e0));
    return out;
}

}  // namespace nnmstab
