#include "fedstyle/loss/oracles.hpp"

#include "fedstyle/loss/losses.hpp"
#include "fedstyle/util/rng.hpp"

#include <cmath>

namespace fedstyle::loss {

namespace {

std::vector<double> unit(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double neg_log_ratio(const Rows& u, std::size_t i, std::size_t j, double tau) {
    double denom = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n)
        if (n != i) denom += std::exp(dot(u[i], u[n]) / tau);
    return -std::log(std::exp(dot(u[i], u[j]) / tau) / denom);
}

ad::Tensor to_tensor(const Rows& r) {
    ad::Tensor t({r.size(), r.front().size()});
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r[i].size(); ++j) t.at(i, j) = r[i][j];
    return t;
}

}  // namespace

double brute_force_nt_xent(const Rows& z1, const Rows& z2, double tau) {
    Rows u;
    for (const auto& r : z1) u.push_back(unit(r));
    for (const auto& r : z2) u.push_back(unit(r));
    const std::size_t b = z1.size();
    double total = 0.0;
    for (std::size_t i = 0; i < 2 * b; ++i) total += neg_log_ratio(u, i, i < b ? i + b : i - b, tau);
    return total / static_cast<double>(2 * b);
}

double brute_force_style_infonce(const Rows& z, std::span<const int> labels, double tau) {
    Rows u;
    for (const auto& r : z) u.push_back(unit(r));
    const std::size_t n = z.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && labels[j] == labels[i]) inner += neg_log_ratio(u, i, j, tau);
        total += inner / static_cast<double>(n - 1);
    }
    return total;
}

std::vector<OracleComparison> run_loss_oracles(std::uint64_t seed, std::size_t max_batch, double tau) {
    Rng rng = make_rng(seed, {stream_tag("loss-oracles")});
    std::normal_distribution<double> normal(0.0, 1.0);
    auto rows = [&](std::size_t n, std::size_t d) {
        Rows r(n, std::vector<double>(d));
        for (auto& row : r)
            for (double& v : row) v = normal(rng);
        return r;
    };
    std::vector<OracleComparison> out;
    for (std::size_t b = 1; b <= max_batch; ++b) {
        const Rows z1 = rows(b, 6), z2 = rows(b, 6);
        {
            ad::Tape tape;
            const double impl =
                nt_xent(tape.constant(to_tensor(z1)), tape.constant(to_tensor(z2)), tau).value().item();
            const double ref = brute_force_nt_xent(z1, z2, tau);
            out.push_back({"nt_xent B=" + std::to_string(b), impl, ref, std::abs(impl - ref)});
        }
        const Rows z = rows(2 * b, 6);
        std::vector<int> labels(2 * b, 0);
        for (std::size_t i = b; i < 2 * b; ++i) labels[i] = 1;
        ad::Tape tape;
        const double impl = style_infonce(tape.constant(to_tensor(z)), labels, tau).value().item();
        const double ref = brute_force_style_infonce(z, labels, tau);
        out.push_back({"style_infonce B=" + std::to_string(b), impl, ref, std::abs(impl - ref)});
    }
    return out;
}

}  // namespace fedstyle::loss
