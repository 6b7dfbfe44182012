#include "user/train/gradcheck_suite.hpp"

#include "user/model/user_model.hpp"
#include "user/train/trainer.hpp"

namespace user {
namespace {

Document doc(const std::string& id, const std::string& title) {
  Document d;
  d.id = id;
  d.title = title;
  return d;
}

Behavior browse(std::int64_t ts, const Document& d) {
  Behavior b;
  b.user = "u1";
  b.ts = ts;
  b.kind = BehaviorKind::Browse;
  b.doc = d;
  return b;
}

Behavior search(std::int64_t ts, const std::string& q, const std::vector<std::pair<Document, bool>>& results) {
  Behavior b;
  b.user = "u1";
  b.ts = ts;
  b.kind = BehaviorKind::Search;
  b.query = q;
  for (const auto& [d, c] : results) b.results.push_back({d, c, c ? 60 : 0});
  return b;
}

/// Scalar probe of a matrix: sum of entries weighted by a fixed random matrix.
ad::Var<double> probe(ad::Var<double> x, std::uint64_t seed) {
  Rng rng(seed);
  ad::Matrix<double> w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1, 1);
  return ad::sum(ad::mul(x, x.graph().constant(w)));
}

}  // namespace

std::vector<Impression> gradcheck_fixture() {
  const auto a = doc("a", "solar panel prices fall");
  const auto b = doc("b", "electric car battery range");
  const auto c = doc("c", "new energy vehicle sales");
  const auto d = doc("d", "football league final score");
  const auto e = doc("e", "battery recycling plant opens");
  const auto f = doc("f", "city marathon route");

  UserHistory h;
  h.long_term.push_back({{browse(100, d), search(200, "league score", {{d, true}, {f, false}, {a, true}})}});
  h.long_term.push_back({{search(5000, "energy car", {{c, true}, {b, true}, {d, false}}), browse(5100, e),
                          browse(5200, b)}});
  h.current.behaviors = {browse(9000, c), search(9100, "battery", {{e, true}, {a, false}})};

  Impression s;
  s.id = "s1";
  s.user = "u1";
  s.ts = 9200;
  s.task = Task::Search;
  s.query = "electric vehicle battery";
  s.candidates = {b, d, a, e, f};
  s.labels = {1, 0, 0, 1, 0};
  s.history = h;
  s.features = {{1.0, 0.6, 0.0, 1.0}, {0.0, 0.0, 0.0, 1.0}, {0.0, 0.1, 0.0, 1.0}, {0.3, 0.2, 0.7, 1.0}, {0, 0, 0, 0}};

  Impression r;
  r.id = "r1";
  r.user = "u1";
  r.ts = 9300;
  r.task = Task::Recommend;
  r.candidates = {f, c, a, d, e};
  r.labels = {0, 1, 0, 0, 0};
  r.history = h;
  r.features.assign(5, FeatureVector{});
  return {s, r};
}

std::vector<GradCheckEntry> run_gradcheck_suite(int dim, std::uint64_t seed, std::size_t samples) {
  const auto imps = gradcheck_fixture();
  std::vector<std::string> texts;
  for (const auto& imp : imps) {
    texts.push_back(imp.query);
    for (const auto& c : imp.candidates) texts.push_back(c.title);
  }
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.heads = 2;
  cfg.head_dim = std::max(1, dim / 2);
  cfg.ffn_dim = dim;
  cfg.att_dim = dim;
  cfg.init_seed = seed;
  // A few words stay out of the vocabulary to exercise UNK.
  texts.pop_back();
  UserModel<double> model(cfg, Vocab::build(texts), {"u1"});
  auto& store = model.params();
  const auto& s = imps[0];
  const auto& r = imps[1];
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, const std::function<ad::Var<double>(ad::Graph<double>&)>& fn) {
    out.push_back({name, ad::grad_check(fn, store, 1e-5, samples, seed)});
  };

  check("text_encoder", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    const auto& t = model.encode_text(g, s.candidates[0].title, cache);
    return ad::add(probe(t.C, 11), probe(t.r, 12));
  });
  check("coattention_fusion", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    return probe(model.encode_behavior(g, s.history.long_term[1].behaviors[0], 0, cache).vec, 13);
  });
  check("session_transformer", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    auto items = model.encode_session(g, s.history.long_term[1], cache);
    auto out = model.session_encoder().transform(g, items, std::make_pair(model.encode_text(g, s.query, cache).r,
                                                                          BehaviorKind::Search));
    return probe(out.outputs, 14);
  });
  check("history_transformer", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    auto ctx = model.encode_context(g, r, cache);
    auto doc_l = model.history_encoder().fuse(g, ctx.history, model.encode_text(g, r.candidates[1].title, cache).r);
    return ad::add(probe(ctx.intent_l, 15), probe(doc_l, 16));
  });
  check("knrm", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    const auto& q = model.encode_text(g, s.query, cache);
    const auto& d = model.encode_text(g, s.candidates[0].title, cache);
    return model.head().knrm(g, q.C, q.mask, d.C, d.mask);
  });
  check("ranking_head", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    auto ctx = model.encode_context(g, s, cache);
    return probe(ad::concat_rows(std::vector<ad::Var<double>>{model.score(g, ctx, s, 0, cache),
                                                              model.score(g, ctx, s, 3, cache)}),
                 17);
  });
  check("group_loss_search", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    return impression_loss(model, g, s, make_training_groups(s, 3, seed), cache);
  });
  check("group_loss_recommend", [&](ad::Graph<double>& g) {
    TextCache<double> cache;
    return impression_loss(model, g, r, make_training_groups(r, 4, seed), cache);
  });
  return out;
}

}  // namespace user
