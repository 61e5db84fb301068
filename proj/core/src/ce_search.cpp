#include "ceaudit/ce_search.hpp"

#include <algorithm>
#include <cmath>

#include "ceaudit/errors.hpp"
#include "ceaudit/rng.hpp"
#include "text_util.hpp"

namespace ceaudit {

double dist(const ValueMap& a, const ValueMap& b, const std::map<NodeId, double>& mad) {
    if (a.size() != b.size()) throw ConfigError("dist: feature sets differ in size");
    double sum = 0.0;
    for (const auto& [name, av] : a) {
        auto bit = b.find(name);
        if (bit == b.end()) throw ConfigError("dist: feature '" + name + "' missing from b");
        auto mit = mad.find(name);
        if (mit == mad.end()) throw ConfigError("dist: no MAD for feature '" + name + "'");
        if (!(mit->second > 0)) throw ConfigError("dist: nonpositive MAD for feature '" + name + "'");
        sum += std::abs(av - bit->second) / mit->second;
    }
    return sum / static_cast<double>(a.size());
}

double yloss(double proba, int desired_class) {
    const double d = proba - desired_class;
    return d * d;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double det_lu(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (a[piv][col] == 0.0) return 0.0;
        if (piv != col) {
            std::swap(a[piv], a[col]);
            det = -det;
        }
        det *= a[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return det;
}

// d(det K)/dK_ab via the minor determinant
double cofactor(const std::vector<std::vector<double>>& k, std::size_t a, std::size_t b) {
    const std::size_t n = k.size();
    std::vector<std::vector<double>> minor;
    minor.reserve(n - 1);
    for (std::size_t r = 0; r < n; ++r) {
        if (r == a) continue;
        std::vector<double> row;
        row.reserve(n - 1);
        for (std::size_t c = 0; c < n; ++c) {
            if (c == b) continue;
            row.push_back(k[r][c]);
        }
        minor.push_back(std::move(row));
    }
    const double sign = ((a + b) % 2 == 0) ? 1.0 : -1.0;
    return sign * (n == 1 ? 1.0 : det_lu(std::move(minor)));
}

}  // namespace

double dpp_diversity(const std::vector<Counterfactual>& ces, const std::map<NodeId, double>& mad) {
    if (ces.empty()) throw ConfigError("dpp_diversity: need at least one counterfactual");
    const std::size_t k = ces.size();
    std::vector<std::vector<double>> kernel(k, std::vector<double>(k, 1.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double v = 1.0 / (1.0 + dist(ces[i].values, ces[j].values, mad));
            kernel[i][j] = kernel[j][i] = v;
        }
    }
    const double det = det_lu(std::move(kernel));
    if (det < -1e-9) {
        throw ConfigError("dpp_diversity: determinant " + detail::fmt_g17(det) + " is negative");
    }
    return det < 0 ? 0.0 : det;
}

std::map<NodeId, double> mad_of(const Dataset& ds) {
    if (ds.units.empty()) throw ConfigError("mad_of: empty dataset");
    std::map<NodeId, double> out;
    for (const NodeId& f : ds.feature_order) {
        std::vector<double> col;
        col.reserve(ds.units.size());
        for (const Unit& u : ds.units) col.push_back(u.values.at(f));
        const double med = median(col);
        for (double& v : col) v = std::abs(v - med);
        const double mad = median(std::move(col));
        out[f] = mad > 0 ? mad : 1.0;
    }
    return out;
}

std::map<NodeId, std::pair<double, double>> bounds_of(const Dataset& ds) {
    if (ds.units.empty()) throw ConfigError("bounds_of: empty dataset");
    std::map<NodeId, std::pair<double, double>> out;
    for (const NodeId& f : ds.feature_order) {
        double lo = ds.units.front().values.at(f), hi = lo;
        for (const Unit& u : ds.units) {
            const double v = u.values.at(f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        out[f] = {lo, hi};
    }
    return out;
}

std::set<NodeId> binary_features_of(const Dataset& ds) {
    std::set<NodeId> out;
    for (const NodeId& f : ds.feature_order) {
        bool binary = true;
        for (const Unit& u : ds.units) {
            const double v = u.values.at(f);
            if (v != 0.0 && v != 1.0) {
                binary = false;
                break;
            }
        }
        if (binary) out.insert(f);
    }
    return out;
}

CeRequest make_request(const Dataset& ds, const Unit& unit, int k, std::uint64_t seed) {
    CeRequest req;
    req.unit = unit;
    req.desired_class = 1 - unit.label;
    req.k = k;
    req.feature_bounds = bounds_of(ds);
    req.binary_features = binary_features_of(ds);
    req.mad = mad_of(ds);
    req.seed = seed;
    return req;
}

namespace {

// Flattened k x m candidate optimization. Binary features are enumerated,
// immutable features pinned, the rest descended in standardized space.
struct SearchSpace {
    const LogisticModel* model = nullptr;
    const CeRequest* req = nullptr;
    int k = 1;
    bool diverse = false;  // joint objective with the diversity term

    std::vector<NodeId> features;
    std::size_t m = 0;
    std::vector<double> x;    // factual values
    std::vector<double> lo, hi;
    std::vector<double> mad;
    std::vector<std::size_t> cont;          // descended coordinates (per CE)
    std::vector<std::size_t> bins;          // enumerated coordinates (per CE)
    std::vector<std::vector<double>> bin_choices;  // allowed values per bins[]

    double proba(const double* c) const {
        double margin = model->bias;
        for (std::size_t j = 0; j < m; ++j) {
            margin += model->weights[j] * (c[j] - model->feature_means[j]) / model->feature_scales[j];
        }
        return 1.0 / (1.0 + std::exp(-margin));
    }

    double dist_to_factual(const double* c) const {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += std::abs(c[j] - x[j]) / mad[j];
        return s / static_cast<double>(m);
    }

    double dist_between(const double* a, const double* b) const {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += std::abs(a[j] - b[j]) / mad[j];
        return s / static_cast<double>(m);
    }

    double dist_weight() const {
        return diverse ? sp_lambda1() / static_cast<double>(k) : 1.0;
    }
    double sp_lambda1() const { return req->lambda1; }

    // Objective and (optionally) its gradient w.r.t. the `cont` coordinates.
    // The L1 distance term can be left out of the gradient so the caller can
    // handle it with its proximal operator instead.
    double eval(const std::vector<double>& c, std::vector<double>* grad,
                bool dist_in_grad = true) const {
        const double kk = static_cast<double>(k);
        const int desired = req->desired_class;
        if (grad) grad->assign(c.size(), 0.0);

        double obj = 0.0;
        for (int i = 0; i < k; ++i) {
            const double* ci = c.data() + i * m;
            const double p = proba(ci);
            const double yl = yloss(p, desired);
            const double di = dist_to_factual(ci);
            if (diverse) {
                obj += yl / kk + req->lambda1 / kk * di;
            } else {
                obj += req->lambda * yl + di;
            }
            if (grad) {
                const double yw = diverse ? 1.0 / kk : req->lambda;
                const double dw = dist_weight();
                const double dyl = yw * 2.0 * (p - desired) * p * (1.0 - p);
                for (std::size_t j : cont) {
                    const double dfdc = model->weights[j] / model->feature_scales[j];
                    double g = dyl * dfdc;
                    const double diff = ci[j] - x[j];
                    if (dist_in_grad && diff != 0.0) {
                        g += dw * (diff > 0 ? 1.0 : -1.0) / (mad[j] * static_cast<double>(m));
                    }
                    (*grad)[i * m + j] += g;
                }
            }
        }

        if (diverse) {
            std::vector<std::vector<double>> kernel(k, std::vector<double>(k, 1.0));
            for (int i = 0; i < k; ++i) {
                for (int j = i + 1; j < k; ++j) {
                    const double v =
                        1.0 / (1.0 + dist_between(c.data() + i * m, c.data() + j * m));
                    kernel[i][j] = kernel[j][i] = v;
                }
            }
            obj -= req->lambda2 * det_lu(kernel);

            if (grad && k > 1) {
                std::vector<std::vector<double>> cof(k, std::vector<double>(k));
                for (int a = 0; a < k; ++a) {
                    for (int b = 0; b < k; ++b) cof[a][b] = cofactor(kernel, a, b);
                }
                for (int i = 0; i < k; ++i) {
                    const double* ci = c.data() + i * m;
                    for (int j2 = 0; j2 < k; ++j2) {
                        if (j2 == i) continue;
                        const double* cj = c.data() + j2 * m;
                        const double kij = kernel[i][j2];
                        // d(-l2*det)/dc via dK_ij = -K_ij^2 * d(dist)
                        const double w = 2.0 * req->lambda2 * cof[i][j2] * kij * kij;
                        for (std::size_t f : cont) {
                            const double diff = ci[f] - cj[f];
                            if (diff == 0.0) continue;
                            (*grad)[i * m + f] +=
                                w * (diff > 0 ? 1.0 : -1.0) / (mad[f] * static_cast<double>(m));
                        }
                    }
                }
            }
        }
        return obj;
    }
};

SearchSpace build_space(const LogisticModel& model, const CeRequest& req, bool diverse) {
    if (req.k < 1) throw ConfigError("k must be >= 1");
    SearchSpace sp;
    sp.model = &model;
    sp.req = &req;
    sp.k = diverse ? req.k : 1;
    sp.diverse = diverse;
    sp.features = model.feature_order;
    sp.m = sp.features.size();

    sp.x.resize(sp.m);
    sp.lo.resize(sp.m);
    sp.hi.resize(sp.m);
    sp.mad.resize(sp.m);
    for (std::size_t j = 0; j < sp.m; ++j) {
        const NodeId& f = sp.features[j];
        auto it = req.unit.values.find(f);
        if (it == req.unit.values.end()) throw ConfigError("unit missing feature '" + f + "'");
        sp.x[j] = it->second;

        auto bit = req.feature_bounds.find(f);
        if (bit == req.feature_bounds.end()) {
            sp.lo[j] = -std::numeric_limits<double>::infinity();
            sp.hi[j] = std::numeric_limits<double>::infinity();
        } else {
            if (bit->second.first > bit->second.second) {
                throw ConfigError("bounds for '" + f + "' have lo > hi");
            }
            sp.lo[j] = bit->second.first;
            sp.hi[j] = bit->second.second;
        }

        auto mit = req.mad.find(f);
        if (mit == req.mad.end() || !(mit->second > 0)) {
            throw ConfigError("request needs a positive MAD for feature '" + f + "'");
        }
        sp.mad[j] = mit->second;

        const bool immutable = req.immutable_features.count(f) > 0;
        const bool binary = req.binary_features.count(f) > 0;
        if (immutable) continue;  // pinned to x
        if (binary) {
            std::vector<double> choices;
            if (sp.lo[j] <= 0.0 && 0.0 <= sp.hi[j]) choices.push_back(0.0);
            if (sp.lo[j] <= 1.0 && 1.0 <= sp.hi[j]) choices.push_back(1.0);
            if (choices.empty()) {
                throw ConfigError("bounds for binary feature '" + f + "' exclude both 0 and 1");
            }
            sp.bins.push_back(j);
            sp.bin_choices.push_back(std::move(choices));
        } else {
            sp.cont.push_back(j);
        }
    }
    return sp;
}

std::vector<Counterfactual> optimize(const SearchSpace& sp) {
    const CeRequest& req = *sp.req;
    const LogisticModel& model = *sp.model;
    const int k = sp.k;
    const std::size_t m = sp.m;

    // Mixed-radix enumeration of binary assignments across all k CEs.
    std::size_t n_combos = 1;
    for (int i = 0; i < k; ++i) {
        for (const auto& ch : sp.bin_choices) {
            n_combos *= ch.size();
            if (n_combos > 4096) {
                throw ConfigError("too many binary feature combinations to enumerate");
            }
        }
    }

    std::vector<double> best_c;
    double best_obj = std::numeric_limits<double>::infinity();

    std::vector<double> c(static_cast<std::size_t>(k) * m);
    std::vector<double> grad;

    for (std::size_t combo = 0; combo < n_combos; ++combo) {
        for (int restart = 0; restart < req.budget.restarts; ++restart) {
            auto stream = rng::derive_stream(req.seed, combo, static_cast<std::uint64_t>(restart));

            for (int i = 0; i < k; ++i) {
                for (std::size_t j = 0; j < m; ++j) c[i * m + j] = sp.x[j];
            }
            std::size_t radix = combo;
            for (int i = 0; i < k; ++i) {
                for (std::size_t b = 0; b < sp.bins.size(); ++b) {
                    const auto& choices = sp.bin_choices[b];
                    c[i * m + sp.bins[b]] = choices[radix % choices.size()];
                    radix /= choices.size();
                }
            }
            if (restart > 0) {
                for (int i = 0; i < k; ++i) {
                    for (std::size_t j : sp.cont) {
                        const double lo = std::isfinite(sp.lo[j]) ? sp.lo[j] : sp.x[j] - 1.0;
                        const double hi = std::isfinite(sp.hi[j]) ? sp.hi[j] : sp.x[j] + 1.0;
                        c[i * m + j] = rng::uniform_in(stream, lo, hi);
                    }
                }
            }

            double run_best = sp.eval(c, nullptr);
            std::vector<double> run_best_c = c;
            int stale = 0;
            for (int iter = 0; iter < req.budget.max_iters && stale < 100; ++iter) {
                // Proximal step: descend the smooth terms, then soft-threshold
                // toward the factual point. Coordinates the smooth gradient
                // cannot justify moving land exactly on x, so counterfactuals
                // stay sparse.
                sp.eval(c, &grad, /*dist_in_grad=*/false);
                const double dw = sp.dist_weight();
                for (int i = 0; i < k; ++i) {
                    for (std::size_t j : sp.cont) {
                        const double s = model.feature_scales[j];
                        const double eta = req.budget.step * s * s;
                        const double t = c[i * m + j] - eta * grad[i * m + j];
                        const double thr = eta * dw / (sp.mad[j] * static_cast<double>(m));
                        const double d = t - sp.x[j];
                        double v = sp.x[j];
                        if (d > thr) {
                            v = sp.x[j] + (d - thr);
                        } else if (d < -thr) {
                            v = sp.x[j] + (d + thr);
                        }
                        c[i * m + j] = std::clamp(v, sp.lo[j], sp.hi[j]);
                    }
                }
                const double obj = sp.eval(c, nullptr);
                if (obj < run_best - 1e-12) {
                    run_best = obj;
                    run_best_c = c;
                    stale = 0;
                } else {
                    ++stale;
                }
            }

            if (run_best < best_obj) {
                best_obj = run_best;
                best_c = run_best_c;
            }
        }
    }

    // Report the objective recomputed at the returned values.
    const double final_obj = sp.eval(best_c, nullptr);
    std::vector<Counterfactual> out(k);
    for (int i = 0; i < k; ++i) {
        Counterfactual& ce = out[i];
        for (std::size_t j = 0; j < m; ++j) ce.values[sp.features[j]] = best_c[i * m + j];
        ce.predicted_proba = model.predict_proba(ce.values);
        ce.predicted_class = ce.predicted_proba >= 0.5 ? 1 : 0;
        ce.converged = ce.predicted_class == req.desired_class;
        ce.objective = final_obj;
    }
    return out;
}

}  // namespace

double wachter_objective(const LogisticModel& model, const CeRequest& req, const ValueMap& c) {
    return req.lambda * yloss(model.predict_proba(c), req.desired_class) +
           dist(c, req.unit.values, req.mad);
}

double dice_objective(const LogisticModel& model, const CeRequest& req,
                      const std::vector<ValueMap>& cs) {
    if (cs.empty()) throw ConfigError("dice_objective: empty candidate list");
    const double k = static_cast<double>(cs.size());
    double obj = 0.0;
    std::vector<Counterfactual> wrapped(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        obj += yloss(model.predict_proba(cs[i]), req.desired_class) / k;
        obj += req.lambda1 / k * dist(cs[i], req.unit.values, req.mad);
        wrapped[i].values = cs[i];
    }
    // Raw determinant, unclamped, so gradient checks see the smooth value.
    const std::size_t n = cs.size();
    std::vector<std::vector<double>> kernel(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            kernel[i][j] = kernel[j][i] = 1.0 / (1.0 + dist(cs[i], cs[j], req.mad));
        }
    }
    return obj - req.lambda2 * det_lu(std::move(kernel));
}

Counterfactual wachter_generate(const LogisticModel& model, const CeRequest& req) {
    // Already on the desired side: the identity perturbation is the answer.
    if (model.predict_class(req.unit.values) == req.desired_class) {
        Counterfactual ce;
        ce.values = req.unit.values;
        ce.predicted_proba = model.predict_proba(ce.values);
        ce.predicted_class = req.desired_class;
        ce.converged = true;
        ce.objective = wachter_objective(model, req, ce.values);
        return ce;
    }
    const auto space = build_space(model, req, /*diverse=*/false);
    auto result = optimize(space);
    return result.front();
}

std::vector<Counterfactual> dice_generate(const LogisticModel& model, const CeRequest& req) {
    const auto space = build_space(model, req, /*diverse=*/true);
    auto result = optimize(space);
    dpp_diversity(result, req.mad);  // enforces the nonnegative-determinant contract
    return result;
}

void write_ces_csv(const std::vector<CeRecord>& records, const std::vector<NodeId>& feature_order,
                   const std::filesystem::path& path) {
    std::vector<std::string> header = {"unit_id", "ce_id"};
    header.insert(header.end(), feature_order.begin(), feature_order.end());
    header.insert(header.end(), {"predicted_class", "objective", "converged"});

    std::string csv = detail::join(header, ",") + "\n";
    for (const CeRecord& r : records) {
        std::vector<std::string> cells = {std::to_string(r.unit_id), std::to_string(r.ce_id)};
        for (const NodeId& f : feature_order) {
            auto it = r.ce.values.find(f);
            if (it == r.ce.values.end()) throw ConfigError("CE missing feature '" + f + "'");
            cells.push_back(detail::fmt_g17(it->second));
        }
        cells.push_back(std::to_string(r.ce.predicted_class));
        cells.push_back(detail::fmt_g17(r.ce.objective));
        cells.push_back(r.ce.converged ? "1" : "0");
        csv += detail::join(cells, ",") + "\n";
    }
    detail::write_file(path, csv);
}

std::vector<CeRecord> read_ces_csv(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CE CSV " + path.string());
    const auto header = detail::split(line, ',');
    if (header.size() < 6 || header[0] != "unit_id" || header[1] != "ce_id" ||
        header[header.size() - 3] != "predicted_class" || header.back() != "converged") {
        throw ConfigError("unexpected CE CSV header in " + path.string());
    }
    const std::vector<NodeId> features(header.begin() + 2, header.end() - 3);

    std::vector<CeRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ConfigError("CE CSV row " + std::to_string(row) + ": wrong cell count");
        }
        CeRecord r;
        const std::string ctx = "CE CSV row " + std::to_string(row);
        r.unit_id = static_cast<std::size_t>(detail::parse_int(cells[0], ctx));
        r.ce_id = static_cast<std::size_t>(detail::parse_int(cells[1], ctx));
        for (std::size_t j = 0; j < features.size(); ++j) {
            r.ce.values[features[j]] = detail::parse_double(cells[2 + j], ctx);
        }
        r.ce.predicted_class = static_cast<int>(detail::parse_int(cells[cells.size() - 3], ctx));
        r.ce.objective = detail::parse_double(cells[cells.size() - 2], ctx);
        r.ce.converged = detail::parse_int(cells.back(), ctx) != 0;
        out.push_back(std::move(r));
        ++row;
    }
    return out;
}

}  // namespace ceaudit
