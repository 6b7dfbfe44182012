#pragma once

#include <chrono>
#include <ostream>
#include <string>
#include <array>
#include <thread>
#include <vector>

#include <json.hpp>

#include "user/eval/evaluate.hpp"
#include "user/log/impressions.hpp"
#include "user/numerics/adam.hpp"
#include "user/train/dataset.hpp"

namespace user {

struct TrainConfig {
  std::size_t negatives = 4;  // K
  double lr = 1e-3;
  std::size_t batch = 16;  // impressions per optimizer step
  int epochs = 10;
  int patience = 3;  // epochs without validation improvement before stopping
  std::uint64_t seed = 7;
  int workers = 1;
  std::size_t val_limit = 0;  // cap on validation impressions per task, 0 for all
  bool eval_initial = false;  // also score the starting parameters as a candidate
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // tag of the model being trained
  double loss = 0, loss_search = 0, loss_recommend = 0;
  std::size_t groups_search = 0, groups_recommend = 0;
  double val_map = -1, val_auc = -1, selection = 0;
  double seconds = 0;
  nlohmann::ordered_json to_json() const;
};

struct TrainSummary {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_selection = -1;
  double first_batch_loss = 0;
  double last_batch_loss = 0;
};

/// Sum of group-softmax losses over the training groups of one impression.
/// The context is encoded once; each needed candidate is scored once.
template <typename S>
ad::Var<S> impression_loss(const UserModel<S>& model, ad::Graph<S>& g, const Impression& imp,
                           const std::vector<TrainingGroup>& groups, TextCache<S>& cache) {
  auto ctx = model.encode_context(g, imp, cache);
  std::vector<ad::Var<S>> scores(imp.candidates.size());
  auto score_of = [&](std::size_t i) {
    if (!scores[i].defined()) scores[i] = model.score(g, ctx, imp, i, cache);
    return scores[i];
  };
  std::vector<ad::Var<S>> losses;
  for (const auto& grp : groups) {
    std::vector<ad::Var<S>> s{score_of(grp.positive)};
    for (auto n : grp.negatives) s.push_back(score_of(n));
    losses.push_back(ad::group_nll(ad::concat_rows(s)));
  }
  return losses.size() == 1 ? losses[0] : ad::sum(ad::concat_rows(losses));
}

namespace detail {

inline std::vector<Impression> capped(const std::vector<Impression>& v, std::size_t limit) {
  if (limit == 0 || v.size() <= limit) return v;
  return {v.begin(), v.begin() + static_cast<long>(limit)};
}

/// Validation metric used for model selection: MAP for search, AUC for
/// recommendation, their mean for the unified model.
template <typename S>
void validate(const UserModel<S>& model, ModelTag tag, const std::vector<Impression>& val_search,
              const std::vector<Impression>& val_rec, const TrainConfig& cfg, EpochRecord& rec) {
  if (!val_search.empty()) rec.val_map = evaluate(model, val_search, "search", cfg.workers).map;
  if (!val_rec.empty()) rec.val_auc = evaluate(model, val_rec, "recommend", cfg.workers).auc;
  switch (tag) {
    case ModelTag::Search: rec.selection = rec.val_map; break;
    case ModelTag::Recommend: rec.selection = rec.val_auc; break;
    case ModelTag::Unified:
      rec.selection = (std::max(rec.val_map, 0.0) + std::max(rec.val_auc, 0.0)) /
                      ((rec.val_map >= 0 ? 1 : 0) + (rec.val_auc >= 0 ? 1 : 0));
      break;
  }
}

struct StepItem {
  const Impression* imp;
  std::vector<TrainingGroup> groups;
};

/// Forward and backward over one worker's share of a batch; parameter
/// gradients land in `sink` (or the store when null). Returns summed loss.
template <typename S>
double run_items(UserModel<S>& model, const std::vector<StepItem>& items, std::size_t begin, std::size_t end,
                 S scale, ad::GradientBuffer<S>* sink, double* task_loss) {
  double total = 0;
  for (std::size_t i = begin; i < end; ++i) {
    ad::Graph<S> g(&model.params(), true);
    TextCache<S> cache;
    auto loss = impression_loss(model, g, *items[i].imp, items[i].groups, cache);
    const double v = static_cast<double>(loss.scalar());
    total += v;
    task_loss[items[i].imp->task == Task::Search ? 0 : 1] += v;
    auto scaled = ad::scale(loss, scale);
    if (sink) {
      g.backward(scaled, *sink);
    } else {
      g.backward(scaled);
    }
  }
  return total;
}

}  // namespace detail

/// Optimizes `model` on the given impressions with Adam, validating after
/// each epoch and restoring the parameters of the best validation epoch.
template <typename S>
TrainSummary train_model(UserModel<S>& model, const std::vector<Impression>& train,
                         const std::vector<Impression>& val, const TrainConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.negatives == 0) throw ConfigError("negatives (K) must be at least 1");
  if (cfg.batch == 0) throw ConfigError("batch must be at least 1");
  const auto val_search = detail::capped(select_task(val, Task::Search), cfg.val_limit);
  const auto val_rec = detail::capped(select_task(val, Task::Recommend), cfg.val_limit);
  TrainSummary summary;
  auto& store = model.params();
  ad::AdamOptions adam;
  adam.lr = cfg.lr;

  auto snapshot = [&] {
    std::vector<ad::Matrix<S>> v;
    for (const auto& p : store) v.push_back(p.value);
    return v;
  };
  std::vector<ad::Matrix<S>> best;
  auto consider = [&](EpochRecord& rec) {
    detail::validate(model, model.tag, val_search, val_rec, cfg, rec);
    if (rec.selection > summary.best_selection) {
      summary.best_selection = rec.selection;
      summary.best_epoch = rec.epoch;
      best = snapshot();
      return true;
    }
    return false;
  };
  auto emit = [&](const EpochRecord& rec) {
    summary.epochs.push_back(rec);
    if (log) *log << rec.to_json().dump() << '\n' << std::flush;
  };

  if (cfg.eval_initial || cfg.epochs == 0) {
    EpochRecord rec;
    rec.phase = tag_name(model.tag);
    consider(rec);
    emit(rec);
  }

  store.zero_grad();
  int stale = 0;
  bool first = true;
  const auto workers = static_cast<std::size_t>(std::max(1, cfg.workers));
  std::vector<ad::GradientBuffer<S>> sinks;
  if (workers > 1)
    for (std::size_t w = 0; w < workers; ++w) sinks.push_back(ad::make_gradient_buffer(store));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(epoch_seed);
    rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = tag_name(model.tag);
    double loss_sum = 0;
    std::size_t group_count = 0;
    double task_loss[2] = {0, 0};

    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<detail::StepItem> items;
      std::size_t batch_groups = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& imp = train[order[i]];
        if (imp.positives() == 0 || imp.positives() == imp.labels.size()) continue;
        detail::StepItem it{&imp, make_training_groups(imp, cfg.negatives, derive_seed(epoch_seed, imp.id))};
        batch_groups += it.groups.size();
        (imp.task == Task::Search ? rec.groups_search : rec.groups_recommend) += it.groups.size();
        items.push_back(std::move(it));
      }
      if (items.empty()) continue;
      const S scale = S(1) / static_cast<S>(batch_groups);
      double batch_loss = 0;
      if (workers == 1) {
        batch_loss = detail::run_items<S>(model, items, 0, items.size(), scale, nullptr, task_loss);
      } else {
        std::vector<std::thread> pool;
        std::vector<double> partial(workers, 0.0);
        std::vector<std::array<double, 2>> tl(workers, {0.0, 0.0});
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            try {
              const std::size_t b = w * items.size() / workers, e = (w + 1) * items.size() / workers;
              partial[w] = detail::run_items(model, items, b, e, scale, &sinks[w], tl[w].data());
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
        for (std::size_t w = 0; w < workers; ++w) {
          batch_loss += partial[w];
          task_loss[0] += tl[w][0];
          task_loss[1] += tl[w][1];
          std::size_t k = 0;
          for (auto& p : store) {
            p.grad += sinks[w][k];
            sinks[w][k].setZero();
            ++k;
          }
        }
      }
      ad::adam_step(store, adam);
      const double mean = batch_loss / static_cast<double>(batch_groups);
      if (first) summary.first_batch_loss = mean;
      first = false;
      summary.last_batch_loss = mean;
      loss_sum += batch_loss;
      group_count += batch_groups;
    }
    rec.loss = group_count ? loss_sum / static_cast<double>(group_count) : 0.0;
    rec.loss_search = rec.groups_search ? task_loss[0] / static_cast<double>(rec.groups_search) : 0.0;
    rec.loss_recommend = rec.groups_recommend ? task_loss[1] / static_cast<double>(rec.groups_recommend) : 0.0;
    const bool improved = consider(rec);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit(rec);
    stale = improved ? 0 : stale + 1;
    if (stale >= cfg.patience) break;
  }
  if (!best.empty()) {
    std::size_t k = 0;
    for (auto& p : store) p.value = best[k++];
  }
  return summary;
}

/// Trains one parameter set on both tasks' impressions, shuffled together.
template <typename S>
TrainSummary pretrain_unified(UserModel<S>& model, const std::vector<Impression>& train,
                              const std::vector<Impression>& val, const TrainConfig& cfg,
                              std::ostream* log = nullptr) {
  bool search = false, rec = false;
  for (const auto& i : train) (i.task == Task::Search ? search : rec) = true;
  if (!search || !rec) throw Error("pretrain_unified: training data must contain both search and recommendation");
  model.tag = ModelTag::Unified;
  return train_model(model, train, val, cfg, log);
}

/// Copy of a unified model optimized on one task with fresh Adam moments.
template <typename S>
UserModel<S> finetune(const UserModel<S>& unified, Task task, const std::vector<Impression>& train,
                      const std::vector<Impression>& val, const TrainConfig& cfg, std::ostream* log = nullptr,
                      TrainSummary* summary = nullptr) {
  if (unified.tag != ModelTag::Unified) throw Error("finetune: expected a unified model, got " + std::string(tag_name(unified.tag)));
  for (const auto& i : train)
    if (i.task != task)
      throw Error("finetune: impression " + i.id + " is " + task_name(i.task) + ", finetuning for " + task_name(task));
  UserModel<S> m = unified;
  m.params().reset_optimizer();
  m.tag = tag_for(task);
  auto s = train_model(m, train, select_task(val, task), cfg, log);
  if (summary) *summary = std::move(s);
  return m;
}

}  // namespace user
