#include "chb/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chb {

Grid make_grid(double Lx, double Ly, int nx, int ny) {
    if (!(Lx > 0.0) || !(Ly > 0.0) || !std::isfinite(Lx) || !std::isfinite(Ly))
        throw std::invalid_argument("make_grid: domain lengths must be positive and finite");
    if (nx < 4 || ny < 4)
        throw std::invalid_argument("make_grid: need at least 4 cells per direction, got " +
                                    std::to_string(nx) + "x" + std::to_string(ny));
    Grid g;
    g.Lx = Lx;
    g.Ly = Ly;
    g.nx = nx;
    g.ny = ny;
    g.hx = Lx / nx;
    g.hy = Ly / ny;
    return g;
}

bool CellField::all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

double CellField::min() const { return v_.empty() ? 0.0 : *std::min_element(v_.begin(), v_.end()); }
double CellField::max() const { return v_.empty() ? 0.0 : *std::max_element(v_.begin(), v_.end()); }

CellField& CellField::operator+=(const CellField& o) {
    if (o.size() != size()) throw std::invalid_argument("CellField: shape mismatch");
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
}

CellField& CellField::operator-=(const CellField& o) {
    if (o.size() != size()) throw std::invalid_argument("CellField: shape mismatch");
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
}

CellField& CellField::operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
}

CellField operator+(CellField a, const CellField& b) { return a += b; }
CellField operator-(CellField a, const CellField& b) { return a -= b; }
CellField operator*(double a, CellField f) { return f *= a; }

bool FaceField::all_finite() const {
    auto fin = [](double x) { return std::isfinite(x); };
    return std::all_of(u_.begin(), u_.end(), fin) && std::all_of(w_.begin(), w_.end(), fin);
}

State State::zeros(const Grid& g) {
    State s;
    s.phi = CellField(g);
    s.mu = CellField(g);
    s.sigma = CellField(g);
    s.p = CellField(g);
    s.v = FaceField(g);
    return s;
}

bool State::on(const Grid& g) const {
    return phi.matches(g) && mu.matches(g) && sigma.matches(g) && p.matches(g) && v.matches(g);
}

EdgeTraces EdgeTraces::constant(const Grid& g, double value) {
    return per_edge(g, {value, value, value, value});
}

EdgeTraces EdgeTraces::per_edge(const Grid& g, const std::array<double, 4>& values) {
    EdgeTraces t;
    t.left.assign(static_cast<std::size_t>(g.ny), values[0]);
    t.right.assign(static_cast<std::size_t>(g.ny), values[1]);
    t.bottom.assign(static_cast<std::size_t>(g.nx), values[2]);
    t.top.assign(static_cast<std::size_t>(g.nx), values[3]);
    return t;
}

std::vector<double>& EdgeTraces::edge(Edge e) {
    switch (e) {
        case Edge::Left: return left;
        case Edge::Right: return right;
        case Edge::Bottom: return bottom;
        default: return top;
    }
}

const std::vector<double>& EdgeTraces::edge(Edge e) const {
    return const_cast<EdgeTraces*>(this)->edge(e);
}

bool EdgeTraces::matches(const Grid& g) const {
    auto ny = static_cast<std::size_t>(g.ny), nx = static_cast<std::size_t>(g.nx);
    return left.size() == ny && right.size() == ny && bottom.size() == nx && top.size() == nx;
}

EdgeTraces wall_traces(const CellField& f) {
    const int nx = f.nx(), ny = f.ny();
    EdgeTraces t;
    t.left.resize(static_cast<std::size_t>(ny));
    t.right.resize(static_cast<std::size_t>(ny));
    t.bottom.resize(static_cast<std::size_t>(nx));
    t.top.resize(static_cast<std::size_t>(nx));
    for (int j = 0; j < ny; ++j) {
        t.left[j] = 1.5 * f(0, j) - 0.5 * f(1, j);
        t.right[j] = 1.5 * f(nx - 1, j) - 0.5 * f(nx - 2, j);
    }
    for (int i = 0; i < nx; ++i) {
        t.bottom[i] = 1.5 * f(i, 0) - 0.5 * f(i, 1);
        t.top[i] = 1.5 * f(i, ny - 1) - 0.5 * f(i, ny - 2);
    }
    return t;
}

EdgeTraces wall_cells(const CellField& f) {
    const int nx = f.nx(), ny = f.ny();
    EdgeTraces t;
    t.left.resize(static_cast<std::size_t>(ny));
    t.right.resize(static_cast<std::size_t>(ny));
    t.bottom.resize(static_cast<std::size_t>(nx));
    t.top.resize(static_cast<std::size_t>(nx));
    for (int j = 0; j < ny; ++j) {
        t.left[j] = f(0, j);
        t.right[j] = f(nx - 1, j);
    }
    for (int i = 0; i < nx; ++i) {
        t.bottom[i] = f(i, 0);
        t.top[i] = f(i, ny - 1);
    }
    return t;
}

void require_on_grid(const CellField& f, const Grid& g, const char* what) {
    if (!f.matches(g))
        throw std::invalid_argument(std::string(what) + ": cell field does not match grid");
}

void require_on_grid(const FaceField& f, const Grid& g, const char* what) {
    if (!f.matches(g))
        throw std::invalid_argument(std::string(what) + ": face field does not match grid");
}

double integrate_cell(const CellField& f, const Grid& g) {
    require_on_grid(f, g, "integrate_cell");
    double s = 0.0;
    for (double x : f.values()) s += x;
    return s * g.cell_area();
}

double inner(const CellField& a, const CellField& b, const Grid& g) {
    require_on_grid(a, g, "inner");
    require_on_grid(b, g, "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s * g.cell_area();
}

double l2_norm(const CellField& f, const Grid& g) { return std::sqrt(inner(f, f, g)); }

double integrate_boundary(const EdgeTraces& t, const Grid& g) {
    if (!t.matches(g)) throw std::invalid_argument("integrate_boundary: trace sizes do not match grid");
    double sy = 0.0, sx = 0.0;
    for (int j = 0; j < g.ny; ++j) sy += t.left[j] + t.right[j];
    for (int i = 0; i < g.nx; ++i) sx += t.bottom[i] + t.top[i];
    return sy * g.hy + sx * g.hx;
}

double boundary_pairing(const EdgeTraces& a, const EdgeTraces& b, const Grid& g) {
    if (!a.matches(g) || !b.matches(g))
        throw std::invalid_argument("boundary_pairing: trace sizes do not match grid");
    double sy = 0.0, sx = 0.0;
    for (int j = 0; j < g.ny; ++j) sy += a.left[j] * b.left[j] + a.right[j] * b.right[j];
    for (int i = 0; i < g.nx; ++i) sx += a.bottom[i] * b.bottom[i] + a.top[i] * b.top[i];
    return sy * g.hy + sx * g.hx;
}

}  // namespace chb
