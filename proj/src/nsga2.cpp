#include "metaforge/nsga2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "metaforge/io.hpp"
#include "metaforge/parallel.hpp"

namespace metaforge {

namespace {
constexpr double kInfeasible = 1e30;
}

// ---------------------------------------------------------------------------
// Core machinery
// ---------------------------------------------------------------------------

bool dominates(const std::vector<double>& obj_a, double viol_a,
               const std::vector<double>& obj_b, double viol_b) {
  const bool feas_a = viol_a <= 0.0, feas_b = viol_b <= 0.0;
  if (feas_a != feas_b) return feas_a;
  if (!feas_a) return viol_a < viol_b;
  bool strictly_better = false;
  for (std::size_t i = 0; i < obj_a.size(); ++i) {
    if (obj_a[i] < obj_b[i]) return false;
    if (obj_a[i] > obj_b[i]) strictly_better = true;
  }
  return strictly_better;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(
    const std::vector<std::vector<double>>& objectives,
    const std::vector<double>& violations) {
  const std::size_t n = objectives.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> dom_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(objectives[p], violations[p], objectives[q], violations[q]))
        dominated[p].push_back(q);
      else if (dominates(objectives[q], violations[q], objectives[p], violations[p]))
        ++dom_count[p];
    }
  for (std::size_t p = 0; p < n; ++p)
    if (dom_count[p] == 0) current.push_back(p);
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t p : current)
      for (std::size_t q : dominated[p])
        if (--dom_count[q] == 0) next.push_back(q);
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front) {
  const std::size_t n = front.size();
  if (n == 0) throw InvalidArgument("empty front");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, 0.0);
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), inf);
    return dist;
  }
  const std::size_t m = front[0].size();
  std::vector<std::size_t> idx(n);
  for (std::size_t obj = 0; obj < m; ++obj) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return front[a][obj] < front[b][obj]; });
    const double lo = front[idx.front()][obj], hi = front[idx.back()][obj];
    dist[idx.front()] = inf;
    dist[idx.back()] = inf;
    if (hi - lo <= 0.0) continue;
    for (std::size_t k = 1; k + 1 < n; ++k)
      if (dist[idx[k]] != inf)
        dist[idx[k]] += (front[idx[k + 1]][obj] - front[idx[k - 1]][obj]) / (hi - lo);
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Problem plumbing
// ---------------------------------------------------------------------------

std::vector<std::pair<double, double>> latent_bounds(
    const std::vector<std::vector<double>>& encodings) {
  if (encodings.size() < 2) throw EmptyDataset("need at least 2 encodings");
  const std::size_t d = encodings[0].size();
  std::vector<std::pair<double, double>> bounds(
      d, {std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()});
  for (const auto& z : encodings) {
    if (z.size() != d) throw ShapeMismatch("encoding lengths differ");
    for (std::size_t i = 0; i < d; ++i) {
      bounds[i].first = std::min(bounds[i].first, z[i]);
      bounds[i].second = std::max(bounds[i].second, z[i]);
    }
  }
  for (const auto& [lo, hi] : bounds)
    if (!(hi > lo)) throw DegenerateBounds("a latent dimension has zero spread");
  return bounds;
}

double robust_objective(const PropertyUq& p, double beta) {
  if (beta < 0.0) throw InvalidArgument("beta must be non-negative");
  return p.mean - beta * p.total;
}

double robust_objective(const UqResult& uq, PropertySelector selector, double beta) {
  switch (selector) {
    case PropertySelector::E: return robust_objective(uq.E, beta);
    case PropertySelector::Nu: return robust_objective(uq.nu, beta);
    case PropertySelector::K:
      throw InvalidArgument("bulk objective needs the per-sample transform");
  }
  return 0.0;
}

VoxelGrid decode_unit(const VaeMdnModel& model, const std::vector<double>& z,
                      double threshold) {
  EighthCell decoded = model.decode(z);
  for (double& v : decoded.occupancy) v = v >= threshold ? 1.0 : 0.0;
  VoxelGrid full = mirror_eighth(decoded);
  return largest_component(full).first;
}

Individual evaluate(const std::vector<double>& z, const VaeMdnModel& model,
                    const DesignProblem& problem, const UqConfig& uq_cfg) {
  Individual ind;
  ind.z = z;
  VoxelGrid unit;
  try {
    unit = decode_unit(model, z);
  } catch (const EmptyStructure&) {
    ind.constraint_violation = kInfeasible;
    ind.objective_values.assign(problem.objectives.size(), 0.0);
    return ind;
  }
  ind.vf = volume_fraction(unit);
  ind.constraint_violation =
      std::max(0.0, std::abs(ind.vf - problem.vf_target) - problem.vf_tolerance);

  if (problem.mode == DesignMode::Robust) {
    UqOutcome uq = predict_with_uncertainty(model, z, uq_cfg);
    ind.uq = uq.result;
    for (const Objective& obj : problem.objectives) {
      if (obj.selector == PropertySelector::K) {
        if (!ind.bulk)
          ind.bulk = aggregate_bulk(uq.samples,
                                    Rng::substream(uq_cfg.seed, {0xb01f}).next());
        ind.objective_values.push_back(robust_objective(*ind.bulk, obj.beta));
      } else {
        ind.objective_values.push_back(robust_objective(uq.result, obj.selector, obj.beta));
      }
    }
  } else {
    const auto pred = model.deterministic_predict(z);
    ind.det_prediction = pred;
    for (const Objective& obj : problem.objectives) {
      switch (obj.selector) {
        case PropertySelector::E: ind.objective_values.push_back(pred[0]); break;
        case PropertySelector::Nu: ind.objective_values.push_back(pred[1]); break;
        case PropertySelector::K: {
          const double denom = std::max(1.0 - 2.0 * pred[1], 1e-9);
          ind.objective_values.push_back(pred[0] / (3.0 * denom));
          break;
        }
      }
    }
  }
  return ind;
}

// ---------------------------------------------------------------------------
// Genetic operators (bounded SBX + polynomial mutation)
// ---------------------------------------------------------------------------

namespace {

void sbx_crossover(const std::vector<double>& p1, const std::vector<double>& p2,
                   const std::vector<std::pair<double, double>>& bounds, double eta,
                   double pc, Rng& rng, std::vector<double>& c1,
                   std::vector<double>& c2) {
  c1 = p1;
  c2 = p2;
  if (rng.uniform() > pc) return;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    if (rng.uniform() > 0.5) continue;
    double y1 = p1[i], y2 = p2[i];
    if (std::abs(y1 - y2) < 1e-14) continue;
    if (y1 > y2) std::swap(y1, y2);
    const double yl = bounds[i].first, yu = bounds[i].second;
    const double u = rng.uniform();
    auto child = [&](double spread_edge, bool lower) {
      const double beta = 1.0 + 2.0 * spread_edge / (y2 - y1);
      const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
      const double betaq =
          u <= 1.0 / alpha
              ? std::pow(u * alpha, 1.0 / (eta + 1.0))
              : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
      const double sign = lower ? -1.0 : 1.0;
      return 0.5 * ((y1 + y2) + sign * betaq * (y2 - y1));
    };
    double v1 = std::clamp(child(y1 - yl, true), yl, yu);
    double v2 = std::clamp(child(yu - y2, false), yl, yu);
    if (rng.uniform() < 0.5) std::swap(v1, v2);
    c1[i] = v1;
    c2[i] = v2;
  }
}

void polynomial_mutation(std::vector<double>& y,
                         const std::vector<std::pair<double, double>>& bounds,
                         double eta, double pm, Rng& rng) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (rng.uniform() > pm) continue;
    const double yl = bounds[i].first, yu = bounds[i].second;
    const double span = yu - yl;
    const double d1 = (y[i] - yl) / span, d2 = (yu - y[i]) / span;
    const double u = rng.uniform();
    const double mp = 1.0 / (eta + 1.0);
    double dq;
    if (u < 0.5) {
      const double xy = 1.0 - d1;
      dq = std::pow(2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0), mp) - 1.0;
    } else {
      const double xy = 1.0 - d2;
      dq = 1.0 - std::pow(2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0), mp);
    }
    y[i] = std::clamp(y[i] + dq * span, yl, yu);
  }
}

struct Ranked {
  int rank = 0;
  double crowding = 0.0;
};

// ranks + crowding for the whole population
std::vector<Ranked> rank_population(const std::vector<CoreIndividual>& pop) {
  std::vector<std::vector<double>> objs;
  std::vector<double> viols;
  for (const auto& ind : pop) {
    objs.push_back(ind.objectives);
    viols.push_back(ind.violation);
  }
  const auto fronts = non_dominated_sort(objs, viols);
  std::vector<Ranked> out(pop.size());
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    std::vector<std::vector<double>> front_objs;
    for (std::size_t i : fronts[f]) front_objs.push_back(objs[i]);
    const auto cd = crowding_distance(front_objs);
    for (std::size_t k = 0; k < fronts[f].size(); ++k) {
      out[fronts[f][k]].rank = static_cast<int>(f);
      out[fronts[f][k]].crowding = cd[k];
    }
  }
  return out;
}

// binary tournament under (feasibility, rank, crowding)
std::size_t tournament(const std::vector<CoreIndividual>& pop,
                       const std::vector<Ranked>& rk, Rng& rng) {
  const std::size_t a = rng.uniform_int(pop.size());
  const std::size_t b = rng.uniform_int(pop.size());
  const bool fa = pop[a].violation <= 0.0;
  const bool fb = pop[b].violation <= 0.0;
  if (fa != fb) return fa ? a : b;
  if (!fa) return pop[a].violation <= pop[b].violation ? a : b;
  if (rk[a].rank != rk[b].rank) return rk[a].rank < rk[b].rank ? a : b;
  return rk[a].crowding >= rk[b].crowding ? a : b;
}

}  // namespace

std::vector<CoreIndividual> nsga2_optimize(
    const std::vector<std::pair<double, double>>& bounds, const EvalFn& eval,
    const NsgaConfig& cfg) {
  if (cfg.population < 4 || cfg.population % 2 != 0)
    throw InvalidArgument("population must be even and >= 4");
  if (bounds.empty()) throw InvalidArgument("bounds unset");
  const std::size_t d = bounds.size();
  const double pm =
      cfg.mutation_prob > 0.0 ? cfg.mutation_prob : 1.0 / static_cast<double>(d);

  auto evaluate_batch = [&](std::vector<std::vector<double>>& zs, int gen) {
    std::vector<CoreIndividual> out(zs.size());
    parallel_for(zs.size(), [&](std::size_t i) {
      EvalResult res = eval(zs[i], gen, i);
      out[i].z = std::move(zs[i]);
      out[i].objectives = std::move(res.objectives);
      out[i].violation = res.violation;
      out[i].payload = std::move(res.payload);
    });
    return out;
  };

  std::vector<std::vector<double>> zs(static_cast<std::size_t>(cfg.population));
  {
    Rng rng = Rng::substream(cfg.seed, {0x1417});
    for (auto& z : zs) {
      z.resize(d);
      for (std::size_t i = 0; i < d; ++i)
        z[i] = rng.uniform(bounds[i].first, bounds[i].second);
    }
  }
  std::vector<CoreIndividual> pop = evaluate_batch(zs, 0);

  for (int gen = 1; gen <= cfg.generations; ++gen) {
    const auto rk = rank_population(pop);
    Rng rng = Rng::substream(cfg.seed, {0x6E4u, static_cast<std::uint64_t>(gen)});
    std::vector<std::vector<double>> children;
    children.reserve(pop.size());
    while (children.size() < pop.size()) {
      const std::size_t pa = tournament(pop, rk, rng);
      const std::size_t pb = tournament(pop, rk, rng);
      std::vector<double> c1, c2;
      sbx_crossover(pop[pa].z, pop[pb].z, bounds, cfg.sbx_eta, cfg.crossover_prob, rng,
                    c1, c2);
      polynomial_mutation(c1, bounds, cfg.mutation_eta, pm, rng);
      polynomial_mutation(c2, bounds, cfg.mutation_eta, pm, rng);
      children.push_back(std::move(c1));
      if (children.size() < pop.size()) children.push_back(std::move(c2));
    }
    std::vector<CoreIndividual> offspring = evaluate_batch(children, gen);

    // elitist environmental selection on parents + offspring
    std::vector<CoreIndividual> combined = std::move(pop);
    for (auto& c : offspring) combined.push_back(std::move(c));
    std::vector<std::vector<double>> objs;
    std::vector<double> viols;
    for (const auto& ind : combined) {
      objs.push_back(ind.objectives);
      viols.push_back(ind.violation);
    }
    const auto fronts = non_dominated_sort(objs, viols);
    std::vector<CoreIndividual> next;
    next.reserve(static_cast<std::size_t>(cfg.population));
    for (const auto& front : fronts) {
      if (next.size() + front.size() <= static_cast<std::size_t>(cfg.population)) {
        for (std::size_t i : front) next.push_back(std::move(combined[i]));
      } else {
        std::vector<std::vector<double>> front_objs;
        for (std::size_t i : front) front_objs.push_back(objs[i]);
        const auto cd = crowding_distance(front_objs);
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
        for (std::size_t k : order) {
          if (next.size() == static_cast<std::size_t>(cfg.population)) break;
          next.push_back(std::move(combined[front[k]]));
        }
      }
      if (next.size() == static_cast<std::size_t>(cfg.population)) break;
    }
    pop = std::move(next);
  }
  return pop;
}

ParetoArchive nsga2_run(const DesignProblem& problem, const VaeMdnModel& model,
                        const NsgaConfig& nsga_cfg, const UqConfig& uq_cfg) {
  if (problem.latent_bounds.empty()) throw InvalidArgument("latent bounds unset");
  if (problem.objectives.empty()) throw InvalidArgument("no objectives");

  const EvalFn eval = [&](const std::vector<double>& z, int gen, std::size_t idx) {
    UqConfig cfg = uq_cfg;
    cfg.seed = Rng::substream(nsga_cfg.seed,
                              {0xEA1u, static_cast<std::uint64_t>(gen), idx})
                   .next();
    auto ind = std::make_shared<Individual>(evaluate(z, model, problem, cfg));
    EvalResult res;
    res.objectives = ind->objective_values;
    res.violation = ind->constraint_violation;
    res.payload = std::move(ind);
    return res;
  };

  const std::vector<CoreIndividual> pop =
      nsga2_optimize(problem.latent_bounds, eval, nsga_cfg);

  std::vector<std::vector<double>> objs;
  std::vector<double> viols;
  for (const auto& ind : pop) {
    objs.push_back(ind.objectives);
    viols.push_back(ind.violation);
  }
  const auto fronts = non_dominated_sort(objs, viols);
  ParetoArchive archive;
  for (std::size_t i : fronts.front())
    archive.members.push_back(*std::static_pointer_cast<Individual>(pop[i].payload));
  for (const auto& m : archive.members) {
    try {
      archive.grids.push_back(decode_unit(model, m.z));
    } catch (const EmptyStructure&) {
      archive.grids.emplace_back();
    }
  }
  return archive;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

std::vector<BetaSweepRow> beta_sweep(const DesignProblem& problem_template,
                                     const std::vector<double>& betas,
                                     const VaeMdnModel& model, const NsgaConfig& nsga_cfg,
                                     const UqConfig& uq_cfg, const MaterialSample& base,
                                     const SolverConfig& solver_cfg) {
  for (double b : betas)
    if (b < 0.0) throw InvalidArgument("beta must be non-negative");
  std::vector<BetaSweepRow> rows;
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    DesignProblem problem = problem_template;
    problem.objectives = {{PropertySelector::K, betas[bi]}};
    NsgaConfig cfg = nsga_cfg;
    cfg.seed = Rng::substream(nsga_cfg.seed, {0xBE7Au, bi}).next();
    const ParetoArchive archive = nsga2_run(problem, model, cfg, uq_cfg);

    // single objective: best feasible member of the final front
    std::size_t best = 0;
    for (std::size_t i = 1; i < archive.members.size(); ++i) {
      const auto& a = archive.members[i];
      const auto& b2 = archive.members[best];
      if (dominates(a.objective_values, a.constraint_violation, b2.objective_values,
                    b2.constraint_violation) ||
          (a.constraint_violation == b2.constraint_violation &&
           a.objective_values[0] > b2.objective_values[0]))
        best = i;
    }
    BetaSweepRow row;
    row.beta = betas[bi];
    row.winner = archive.members[best];
    row.grid = archive.grids[best];
    if (row.grid.edge_voxels > 0) {
      const ElasticProps props = effective_properties(row.grid, base, solver_cfg);
      row.fea_E = props.E;
      row.fea_nu = props.nu;
      row.fea_K = bulk_modulus(props);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ParetoCompareReport pareto_compare(const ParetoArchive& robust_archive,
                                   const ParetoArchive& det_archive,
                                   const VaeMdnModel& model, double beta,
                                   const UqConfig& uq_cfg, const MaterialSample& base,
                                   int fea_replicates, std::uint64_t seed,
                                   const SolverConfig& solver_cfg) {
  if (robust_archive.members.empty() || det_archive.members.empty())
    throw EmptyDataset("both archives must be non-empty");
  if (fea_replicates < 2) throw InvalidSampleCount("need >= 2 FEA replicates");

  ParetoCompareReport report;
  const std::size_t n_rob = robust_archive.members.size();
  const std::size_t total = n_rob + det_archive.members.size();
  report.candidates.resize(total);

  parallel_for(total, [&](std::size_t k) {
    const bool robust_arm = k < n_rob;
    const Individual& src = robust_arm ? robust_archive.members[k]
                                       : det_archive.members[k - n_rob];
    CompareCandidate cand;
    cand.robust_arm = robust_arm;
    cand.z = src.z;

    // common-seed re-scoring under the robust objective
    UqConfig cfg = uq_cfg;
    cfg.seed = Rng::substream(seed, {0xC03E, k}).next();
    const UqOutcome uq = predict_with_uncertainty(model, src.z, cfg);
    cand.robust_scores = {robust_objective(uq.result.E, beta),
                          robust_objective(uq.result.nu, beta)};

    // FEA with material-noise replicates
    try {
      const VoxelGrid unit = decode_unit(model, src.z);
      const AleatoricStudy study = true_aleatoric_study(
          unit, base, fea_replicates, Rng::substream(seed, {0xFEA0, k}).next(),
          solver_cfg);
      cand.fea_E = study.mean.E;
      cand.fea_nu = study.mean.nu;
      cand.cv_E = 100.0 * study.stddev.E / std::abs(study.mean.E);
      cand.cv_nu = 100.0 * study.stddev.nu / std::abs(study.mean.nu);
    } catch (const Error&) {
      // leave FEA fields at zero for degenerate decodes
    }
    report.candidates[k] = std::move(cand);
  });

  // dominance of deterministic candidates against the robust front
  std::size_t covered = 0;
  for (std::size_t k = n_rob; k < total; ++k) {
    const auto& det = report.candidates[k];
    bool dominated = false;
    for (std::size_t r = 0; r < n_rob; ++r) {
      const auto& rob = report.candidates[r];
      if (rob.robust_scores[0] >= det.robust_scores[0] &&
          rob.robust_scores[1] >= det.robust_scores[1]) {
        dominated = true;
        break;
      }
    }
    report.candidates[k].dominated_or_tied = dominated;
    if (dominated) ++covered;
  }
  report.fraction_det_dominated =
      static_cast<double>(covered) / static_cast<double>(total - n_rob);

  std::vector<double> cvE_rob, cvE_det, cvNu_rob, cvNu_det;
  for (const auto& c : report.candidates) {
    (c.robust_arm ? cvE_rob : cvE_det).push_back(c.cv_E);
    (c.robust_arm ? cvNu_rob : cvNu_det).push_back(c.cv_nu);
  }
  report.median_cv_E_robust = median(cvE_rob);
  report.median_cv_E_det = median(cvE_det);
  report.median_cv_nu_robust = median(cvNu_rob);
  report.median_cv_nu_det = median(cvNu_det);
  return report;
}

// ---------------------------------------------------------------------------
// Archive output
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> archive_header() {
  return {"case",       "beta",        "z_json",      "pred_mu_E",  "pred_sigma_E",
          "pred_mu_nu", "pred_sigma_nu", "pred_mu_K", "pred_sigma_K", "vf",
          "fea_E",      "fea_nu",      "fea_K"};
}

std::vector<std::string> archive_row(const std::string& case_name, double beta,
                                     const Individual& ind, double fea_E, double fea_nu,
                                     double fea_K) {
  const nlohmann::json zj = ind.z;
  std::string mu_E = "-", sg_E = "-", mu_nu = "-", sg_nu = "-", mu_K = "-", sg_K = "-";
  if (ind.uq) {
    mu_E = format_double(ind.uq->E.mean);
    sg_E = format_double(ind.uq->E.total);
    mu_nu = format_double(ind.uq->nu.mean);
    sg_nu = format_double(ind.uq->nu.total);
  } else {
    mu_E = format_double(ind.det_prediction[0]);
    mu_nu = format_double(ind.det_prediction[1]);
  }
  if (ind.bulk) {
    mu_K = format_double(ind.bulk->mean);
    sg_K = format_double(ind.bulk->total);
  }
  return {case_name, format_double(beta), zj.dump(), mu_E, sg_E, mu_nu, sg_nu,
          mu_K,      sg_K,                format_double(ind.vf),
          format_double(fea_E), format_double(fea_nu), format_double(fea_K)};
}

}  // namespace

void write_archive_csv(const std::filesystem::path& path, const std::string& case_name,
                       double /*beta*/, const std::vector<BetaSweepRow>& rows,
                       const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = archive_header();
  for (const auto& r : rows)
    table.rows.push_back(
        archive_row(case_name, r.beta, r.winner, r.fea_E, r.fea_nu, r.fea_K));
  write_csv(path, table);
}

void write_archive_csv(const std::filesystem::path& path, const std::string& case_name,
                       double beta, const ParetoArchive& archive,
                       const std::vector<std::array<double, 3>>& fea,
                       const std::string& run_id) {
  CsvTable table;
  if (!run_id.empty()) table.comments.push_back("# run:" + run_id);
  table.header = archive_header();
  for (std::size_t i = 0; i < archive.members.size(); ++i) {
    const auto f = i < fea.size() ? fea[i] : std::array<double, 3>{0, 0, 0};
    table.rows.push_back(
        archive_row(case_name, beta, archive.members[i], f[0], f[1], f[2]));
  }
  write_csv(path, table);
}

}  // namespace metaforge
