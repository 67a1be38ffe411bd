// Builds a small synthetic benchmark, runs Zip-Adapter and Zip-Adapter-F over
// a few K-shot episodes and prints the accuracy table.
#include <iostream>

#include <mvrec/mvrec.hpp>

int main() {
  using namespace mvrec;
  const std::vector<DatasetManifest> manifests = {make_synthetic_manifest("demo", 4, 12, 0)};
  const auto views = generate_all_views(manifests, AugmentConfig{});

  SyntheticConfig syn;
  syn.sigma_inst = 1.2;
  syn.sigma_view = 1.0;
  const auto file = synthetic_embeddings(manifests, views, syn);
  const auto embeddings = load_embeddings(file, views).embeddings;

  ExperimentSpec spec;
  spec.classifiers = {ClassifierKind::Zip, ClassifierKind::ZipF, ClassifierKind::ProtoNet};
  spec.ks = {1, 3};
  spec.seeds = {0, 1, 2};
  spec.config.zip_f.iterations = 100;

  std::cout << report_text(run_experiment(manifests, embeddings, spec));
}
