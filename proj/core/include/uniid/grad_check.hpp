#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "uniid/optim.hpp"
#include "uniid/tensor.hpp"

namespace uniid {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int64_t elements = 0;
    bool finite = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool pass = true;
    std::string failure_location; // set when a non-finite value was hit

    std::string summary() const {
        std::string s;
        for (const auto& e : entries)
            s += e.name + ": max_rel_err=" + std::to_string(e.max_rel_err) +
                 (e.finite ? "" : " NON-FINITE") + "\n";
        s += pass ? "PASS" : "FAIL";
        return s;
    }
};

// Central-difference gradient oracle. Compares reverse-mode gradients of a
// deterministic scalar loss against (f(p+h) - f(p-h)) / 2h per element.
//
// Relative error uses |ad - fd| / max(1e-3, |ad|, |fd|): the floor keeps
// sub-milli gradients from amplifying finite-difference roundoff while still
// enforcing absolute agreement to tolerance*1e-3 there. Run at 64-bit.
template <typename S>
GradCheckReport finite_diff_check(const std::function<TensorT<S>()>& loss_fn,
                                  ParamStoreT<S>& params, double tolerance, double h = 1e-5) {
    GradCheckReport report;

    params.zero_grad();
    TensorT<S> loss = loss_fn();
    loss.backward();

    for (size_t pi = 0; pi < params.size(); ++pi) {
        ParameterT<S>& p = params[pi];
        if (p.frozen) continue;
        GradCheckEntry entry;
        entry.name = p.name;
        entry.elements = p.tensor.numel();
        std::vector<S> ad(p.tensor.grad());

        auto& val = p.tensor.data();
        for (int64_t j = 0; j < p.tensor.numel(); ++j) {
            const S saved = val[j];
            double lp, lm;
            {
                NoGradGuard ng;
                val[j] = saved + S(h);
                lp = (double)loss_fn().item();
                val[j] = saved - S(h);
                lm = (double)loss_fn().item();
            }
            val[j] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double a = (double)ad[j];
            if (!std::isfinite(fd) || !std::isfinite(a)) {
                entry.finite = false;
                report.pass = false;
                if (report.failure_location.empty())
                    report.failure_location = p.name + "[" + std::to_string(j) + "]";
                continue;
            }
            const double rel = std::abs(a - fd) / std::max({1e-3, std::abs(a), std::abs(fd)});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    if (report.max_rel_err >= tolerance) report.pass = false;
    params.zero_grad();
    return report;
}

} // namespace uniid
