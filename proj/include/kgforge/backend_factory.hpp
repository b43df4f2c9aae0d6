#pragma once

#include <memory>

#include "kgforge/pipeline.hpp"
#include "kgforge/remote_backend.hpp"

namespace kgforge {

// Builds the configured backend pair. Mock selections never touch the
// network.
inline Backends make_backends(const PipelineConfig& config) {
  if (config.backend == "remote") {
    RemoteConfig rc;
    rc.base_url = config.remote_base_url;
    rc.chat_model = config.remote_chat_model;
    rc.embed_model = config.remote_embed_model;
    rc.timeout_seconds = config.remote_timeout_seconds;
    rc.max_in_flight = config.remote_max_in_flight;
    rc.embed_dimensions = config.remote_embed_dimensions;
    auto session = std::make_shared<RemoteSession>(rc);
    Backends b;
    b.llm = std::make_unique<RemoteLlm>(session);
    b.embedder = std::make_unique<RemoteEmbedder>(session);
    return b;
  }
  return make_mock_backends(config);
}

}  // namespace kgforge
