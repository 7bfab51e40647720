#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace chb {

/// Uniform cell-centred discretisation of the rectangle [0,Lx] x [0,Ly].
/// Scalars live at cell centres, velocity components on the staggered faces.
struct Grid {
    double Lx = 1.0;
    double Ly = 1.0;
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;

    int cells() const { return nx * ny; }
    int idx(int i, int j) const { return i + nx * j; }
    double cell_area() const { return hx * hy; }
    double area() const { return Lx * Ly; }
    double perimeter() const { return 2.0 * (Lx + Ly); }
    double xc(int i) const { return (i + 0.5) * hx; }
    double yc(int j) const { return (j + 0.5) * hy; }

    bool operator==(const Grid&) const = default;
};

Grid make_grid(double Lx, double Ly, int nx, int ny);

/// One scalar unknown sampled at the cell centres, row-major in x.
class CellField {
public:
    CellField() = default;
    explicit CellField(const Grid& g, double value = 0.0)
        : nx_(g.nx), ny_(g.ny), v_(static_cast<std::size_t>(g.cells()), value) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(int i, int j) { return v_[static_cast<std::size_t>(i + nx_ * j)]; }
    double operator()(int i, int j) const { return v_[static_cast<std::size_t>(i + nx_ * j)]; }
    double& operator[](std::size_t k) { return v_[k]; }
    double operator[](std::size_t k) const { return v_[k]; }

    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool matches(const Grid& g) const { return nx_ == g.nx && ny_ == g.ny; }
    bool all_finite() const;
    double min() const;
    double max() const;

    CellField& operator+=(const CellField& o);
    CellField& operator-=(const CellField& o);
    CellField& operator*=(double a);

    bool operator==(const CellField&) const = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> v_;
};

CellField operator+(CellField a, const CellField& b);
CellField operator-(CellField a, const CellField& b);
CellField operator*(double a, CellField f);

/// MAC velocity: u on the (nx+1) x ny vertical faces, w on the nx x (ny+1)
/// horizontal faces. Boundary faces are included.
class FaceField {
public:
    FaceField() = default;
    explicit FaceField(const Grid& g, double value = 0.0)
        : nx_(g.nx), ny_(g.ny),
          u_(static_cast<std::size_t>((g.nx + 1) * g.ny), value),
          w_(static_cast<std::size_t>(g.nx * (g.ny + 1)), value) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }

    double& u(int i, int j) { return u_[static_cast<std::size_t>(i + (nx_ + 1) * j)]; }
    double u(int i, int j) const { return u_[static_cast<std::size_t>(i + (nx_ + 1) * j)]; }
    double& w(int i, int j) { return w_[static_cast<std::size_t>(i + nx_ * j)]; }
    double w(int i, int j) const { return w_[static_cast<std::size_t>(i + nx_ * j)]; }

    std::vector<double>& u_values() { return u_; }
    const std::vector<double>& u_values() const { return u_; }
    std::vector<double>& w_values() { return w_; }
    const std::vector<double>& w_values() const { return w_; }

    bool matches(const Grid& g) const { return nx_ == g.nx && ny_ == g.ny; }
    bool all_finite() const;

    bool operator==(const FaceField&) const = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> u_;
    std::vector<double> w_;
};

/// (phi, mu, sigma, v, p) at one time level.
struct State {
    double t = 0.0;
    CellField phi;
    CellField mu;
    CellField sigma;
    CellField p;
    FaceField v;

    static State zeros(const Grid& g);
    bool on(const Grid& g) const;
};

enum class Edge { Left = 0, Right = 1, Bottom = 2, Top = 3 };

/// Per-wall-face samples; left/right carry ny entries, bottom/top nx.
struct EdgeTraces {
    std::vector<double> left;
    std::vector<double> right;
    std::vector<double> bottom;
    std::vector<double> top;

    static EdgeTraces constant(const Grid& g, double value);
    static EdgeTraces per_edge(const Grid& g, const std::array<double, 4>& values);
    std::vector<double>& edge(Edge e);
    const std::vector<double>& edge(Edge e) const;
    bool matches(const Grid& g) const;
};

/// Wall values by linear extrapolation from the two nearest cell centres.
EdgeTraces wall_traces(const CellField& f);
/// Values of the cells adjacent to each wall face.
EdgeTraces wall_cells(const CellField& f);

/// Midpoint rule over the cells, summed in storage order.
double integrate_cell(const CellField& f, const Grid& g);
/// Discrete L2 inner product with cell-area weights.
double inner(const CellField& a, const CellField& b, const Grid& g);
double l2_norm(const CellField& f, const Grid& g);
/// Midpoint rule over the four edges.
double integrate_boundary(const EdgeTraces& traces, const Grid& g);
/// Midpoint rule of the face-by-face product a*b over the four edges.
double boundary_pairing(const EdgeTraces& a, const EdgeTraces& b, const Grid& g);

template <class F>
CellField sample(const Grid& g, F&& f) {
    CellField out(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.xc(i), g.yc(j));
    return out;
}

void require_on_grid(const CellField& f, const Grid& g, const char* what);
void require_on_grid(const FaceField& f, const Grid& g, const char* what);

}  // namespace chb
