#include "lts/config.hpp"

#include <set>

namespace lts {

void PipelineConfig::validate() const {
  csf.validate();
  sor.validate();
  if (normals.k < 3) throw Error("normals k must be >= 3");
  icp.validate();
  icp_starts.validate();
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  tiling.validate();
  weights.validate();
}

std::size_t SessionManifest::reference_index() const {
  std::size_t count = 0, index = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (sessions[i].role == SessionRole::kReference) {
      ++count;
      index = i;
    }
  }
  if (count != 1) throw Error("manifest needs exactly one reference session");
  return index;
}

void SessionManifest::validate() const {
  if (sessions.size() < 2) throw Error("need at least two observations");
  reference_index();
  std::set<std::string> ids;
  for (const auto& s : sessions) {
    if (s.id.empty()) throw Error("session id must not be empty");
    if (!ids.insert(s.id).second) throw Error("duplicate session id '" + s.id + "'");
  }
  config.validate();
}

}  // namespace lts
