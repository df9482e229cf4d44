#pragma once

// HTTP/JSON front end for annotation sessions. The endpoint reference is in
// docs/annotation-api.md.

#include <cstddef>
#include <memory>
#include <string>

#include "ptseg/annotation.hpp"

namespace ptseg {

struct ServiceOptions {
  StoreOptions store;
  std::size_t max_body_bytes = 512u << 20;
};

class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options = {});
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds `host:port` (0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  SessionStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ptseg
