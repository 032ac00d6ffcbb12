#include "poolbias/retriever.hpp"

#include "poolbias/rng.hpp"

namespace poolbias {

Retriever Retriever::oracle_noisy(const World& world, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("oracle_noisy sigma must be >= 0");
  Retriever r;
  r.kind_ = RetrieverKind::oracle_noisy;
  r.sigma_ = sigma;
  r.seed_ = seed;
  r.world_ = &world;
  return r;
}

Retriever Retriever::feature_subset(int dims) {
  if (dims < 1) throw ConfigError("feature_subset dims must be >= 1");
  Retriever r;
  r.kind_ = RetrieverKind::feature_subset;
  r.subset_dims_ = dims;
  return r;
}

Retriever Retriever::trained(DifferentiableScorer scorer) {
  Retriever r;
  r.kind_ = RetrieverKind::trained;
  r.scorer_ = std::move(scorer);
  return r;
}

double Retriever::score(const Query& q, const Document& d) const {
  switch (kind_) {
    case RetrieverKind::oracle_noisy: {
      double sim = world_->latent_similarity(q.query_id, d.doc_id);
      if (sigma_ == 0.0) return sim;
      return sim + sigma_ * rng::keyed_normal(seed_, q.query_id, d.doc_id);
    }
    case RetrieverKind::feature_subset: {
      if (q.features.size() != d.features.size())
        throw DimensionError("feature dimension mismatch between query and document");
      if (subset_dims_ > static_cast<int>(q.features.size()))
        throw DimensionError("feature_subset dims exceed the feature dimension");
      double s = 0.0;
      for (int i = 0; i < subset_dims_; ++i) s += q.features[i] * d.features[i];
      return s;
    }
    case RetrieverKind::trained: {
      FeatureVector x = pair_features(q, d);
      return scorer_->forward(x);
    }
  }
  return 0.0;
}

RankedList Retriever::retrieve(const Query& q, const std::vector<Document>& corpus,
                               std::size_t k) const {
  if (k > corpus.size()) throw DimensionError("retrieve k exceeds corpus size");
  std::vector<std::pair<std::string, double>> scored(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    scored[i] = {corpus[i].doc_id, score(q, corpus[i])};
  return RankedList::from_scores(q.query_id, std::move(scored), k);
}

Run Retriever::retrieve_all(const std::vector<Query>& queries,
                            const std::vector<Document>& corpus, std::size_t k) const {
  Run run;
  run.reserve(queries.size());
  for (const auto& q : queries) run.push_back(retrieve(q, corpus, k));
  std::sort(run.begin(), run.end(),
            [](const RankedList& a, const RankedList& b) { return a.query_id < b.query_id; });
  return run;
}

}  // namespace poolbias
