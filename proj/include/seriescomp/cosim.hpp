#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "seriescomp/deployment.hpp"
#include "seriescomp/errors.hpp"
#include "seriescomp/phasor.hpp"

namespace seriescomp {

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------
//
// Frame layout, little-endian throughout:
//
//   offset  size  field
//   0       4     magic "CSL1"
//   4       1     version (= 1)
//   5       1     kind
//   6       4     seq        (uint32, strictly increasing per direction)
//   10      8     t_ns       (uint64, simulated time)
//   18      2     n_channels (uint16)
//   20      16*n  channels   (n pairs of float64 re, im)
//   20+16n  4     crc32      (IEEE 802.3, over all preceding bytes)
//
// Channel conventions on top of the raw frame:
//   Hello         n = phase count P, channel values unused (zeros).
//   SampleRequest n = 2P: [0,P) line-current phasors,
//                         [P,2P) flag words (re = IPB level, im = backup-LOR).
//   CommandReply  n = 2P: [0,P) injection phasors,
//                         [P,2P) (re = device mode code, im = primary flag).
//   Bye, Fault    n = 0.
//
// A request with seq = k+1 samples simulation step k; both ends derive the
// step time as k * dt from their own copy of the scenario, never from t_ns,
// so timer arithmetic is bit-identical on both sides.

enum class FrameKind : std::uint8_t {
  SampleRequest = 1,
  CommandReply = 2,
  Hello = 3,
  Bye = 4,
  Fault = 5,
};

struct CosimFrame {
  std::uint8_t version = 1;
  FrameKind kind = FrameKind::Hello;
  std::uint32_t seq = 0;
  std::uint64_t t_ns = 0;
  std::vector<Phasor> channels;

  bool operator==(const CosimFrame&) const = default;
};

struct DecodeError {
  std::string field;  // the field that failed: magic, version, kind, length, crc32
  std::string message;
};

using DecodeResult = std::variant<CosimFrame, DecodeError>;

std::vector<std::uint8_t> encode_frame(const CosimFrame& frame);

/// Strict decoder over one complete frame buffer. Never throws on arbitrary
/// bytes; every rejection names the failing field.
DecodeResult decode_frame(const std::uint8_t* data, std::size_t size);

constexpr std::size_t kFrameHeaderBytes = 20;
constexpr std::size_t kFrameCrcBytes = 4;

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

/// Reliable ordered byte stream; the protocol does not care what backs it.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void send(const std::uint8_t* data, std::size_t size) = 0;
  /// Blocks until exactly `size` bytes arrive or `timeout_ms` of wall time
  /// passes. Returns false on timeout; throws LinkError on a broken stream.
  virtual bool recv_exact(std::uint8_t* data, std::size_t size,
                          int timeout_ms) = 0;
};

/// POSIX fd-backed stream (pipe or socket).
class FdStream : public ByteStream {
 public:
  FdStream(int read_fd, int write_fd, bool owns = true);
  ~FdStream() override;
  void send(const std::uint8_t* data, std::size_t size) override;
  bool recv_exact(std::uint8_t* data, std::size_t size,
                  int timeout_ms) override;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
};

/// Frame-level send/receive over a stream.
void send_frame(ByteStream& stream, const CosimFrame& frame);
/// Receives one frame; returns nullopt on timeout. Throws LinkError on
/// malformed bytes (carrying the decoder's field name).
std::optional<CosimFrame> recv_frame(ByteStream& stream, int timeout_ms);

// ---------------------------------------------------------------------------
// Lock-step link (simulator side)
// ---------------------------------------------------------------------------

struct LinkState {
  enum class Phase { Handshaking, Running, Closed, Faulted };
  Phase phase = Phase::Handshaking;
  std::uint32_t last_seq_sent = 0;
  std::uint32_t last_seq_received = 0;
  int timeout_ms = 1000;
};

struct RemotePhaseReply {
  Phasor injection_kv{0.0, 0.0};
  DeviceMode mode = DeviceMode::Monitoring;
  bool primary = false;
};

class CosimLink {
 public:
  CosimLink(std::unique_ptr<ByteStream> stream, int timeout_ms);

  /// Hello exchange; Running on success, throws LinkError otherwise.
  void handshake();

  /// One lock-step exchange for simulation step `step_index`. Simulated time
  /// does not advance until the matching reply arrives. Throws LinkError on
  /// timeout (link Faulted), protocol violation, or a remote Bye/Fault.
  std::array<RemotePhaseReply, 3> lockstep_exchange(
      long step_index, double dt_s, const std::array<Phasor, 3>& i_line_ka,
      const std::array<bool, 3>& ipb_level, bool backup_lor);

  /// Polite shutdown; ignores transport errors.
  void bye();

  const LinkState& state() const { return state_; }

 private:
  std::unique_ptr<ByteStream> stream_;
  LinkState state_;
};

// ---------------------------------------------------------------------------
// Device server (controller side)
// ---------------------------------------------------------------------------

/// Serves the first modeled device of each phase of one deployment over the
/// wire protocol, running the identical device core as the in-process path.
/// Returns when the peer says Bye or the stream closes.
void serve_deployment(ByteStream& stream, const DeploymentConfig& cfg,
                      const FeatureFlags& flags, double dt_s);

// ---------------------------------------------------------------------------
// Child process transport
// ---------------------------------------------------------------------------

class ChildProcess {
 public:
  /// Spawns argv[0] with the remaining arguments, stdin/stdout wired to the
  /// returned stream. stderr passes through.
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  std::unique_ptr<ByteStream> take_stream();
  /// Waits for exit; returns the status or -1.
  int wait();

 private:
  int pid_ = -1;
  int read_fd_ = -1;
  int write_fd_ = -1;
  bool waited_ = false;
};

/// Directory of the running executable, used to locate the sibling
/// device-server binary.
std::string executable_directory();

}  // namespace seriescomp
