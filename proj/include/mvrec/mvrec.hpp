#pragma once

#include "mvrec/adamw.hpp"
#include "mvrec/classifiers/baselines.hpp"
#include "mvrec/classifiers/classifier.hpp"
#include "mvrec/classifiers/zip_adapter.hpp"
#include "mvrec/classifiers/zip_trainer.hpp"
#include "mvrec/components.hpp"
#include "mvrec/dataset.hpp"
#include "mvrec/embedding_store.hpp"
#include "mvrec/error.hpp"
#include "mvrec/features_csv.hpp"
#include "mvrec/geometry.hpp"
#include "mvrec/gradcheck.hpp"
#include "mvrec/harness.hpp"
#include "mvrec/image_io.hpp"
#include "mvrec/losses.hpp"
#include "mvrec/manifest_io.hpp"
#include "mvrec/numerics.hpp"
#include "mvrec/parallel.hpp"
#include "mvrec/params_io.hpp"
#include "mvrec/raster.hpp"
#include "mvrec/report.hpp"
#include "mvrec/rle.hpp"
#include "mvrec/rng.hpp"
#include "mvrec/synthetic.hpp"
#include "mvrec/tensor.hpp"
#include "mvrec/views_io.hpp"
