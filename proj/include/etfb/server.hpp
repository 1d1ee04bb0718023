#pragma once

// Network front end for a SessionEngine.
//
// A tick thread owns the engine and paces it at the harness tick rate. An
// I/O thread runs the listeners: newline-delimited JSON over plain TCP, and
// an HTTP port that upgrades /ws to a WebSocket (one JSON message per text
// frame) and serves static files from the asset directory. The two threads
// exchange messages through an inbound queue and posted sends only.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "etfb/session_engine.hpp"

namespace etfb::server {

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 0;  ///< NDJSON port; 0 picks a free port
    std::optional<std::uint16_t> http_port;  ///< WebSocket bridge and assets; 0 picks a free port
    std::filesystem::path assets_dir;  ///< empty: no static files
    double snapshot_rate = 30.0;  ///< max snapshots per second sent to clients
    double speed = 1.0;  ///< simulated seconds per wall-clock second
    std::size_t max_line = 1 << 16;  ///< bytes
};

class SessionServer {
public:
    SessionServer(session::EngineOptions engine, ServerOptions options);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Bind listeners and start the threads. Throws IoError when binding fails.
    void start();
    /// Stop the threads and close every connection. Idempotent.
    void stop();
    /// Blocks until the session is complete or aborted.
    void wait_finished();
    bool finished() const;

    std::uint16_t port() const;
    std::optional<std::uint16_t> http_port() const;
    const std::string& session_id() const;

    /// Dataset of the session; call after stop().
    const SessionDataset& dataset() const;
    const DeviceSimulator& device() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Content type for a static asset path.
std::string content_type_for(const std::filesystem::path& path);

}  // namespace etfb::server
