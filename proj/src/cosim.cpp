#include "seriescomp/cosim.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>
#include <zlib.h>

#include <chrono>
#include <cstring>

namespace seriescomp {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'L', '1'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint16_t kMaxChannels = 1024;

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_f64(std::vector<std::uint8_t>& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(b, bits);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = get_u64(p);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data),
              static_cast<uInt>(size)));
}

std::uint64_t step_time_ns(long step_index, double dt_s) {
  return static_cast<std::uint64_t>(
      std::llround(static_cast<double>(step_index) * dt_s * 1e9));
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const CosimFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + frame.channels.size() * 16 + kFrameCrcBytes);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(frame.version);
  out.push_back(static_cast<std::uint8_t>(frame.kind));
  put_u32(out, frame.seq);
  put_u64(out, frame.t_ns);
  put_u16(out, static_cast<std::uint16_t>(frame.channels.size()));
  for (const auto& ch : frame.channels) {
    put_f64(out, ch.real());
    put_f64(out, ch.imag());
  }
  put_u32(out, crc_of(out.data(), out.size()));
  return out;
}

DecodeResult decode_frame(const std::uint8_t* data, std::size_t size) {
  if (size < kFrameHeaderBytes + kFrameCrcBytes)
    return DecodeError{"length", "frame shorter than header"};
  if (std::memcmp(data, kMagic, 4) != 0)
    return DecodeError{"magic", "bad magic"};
  std::uint8_t version = data[4];
  if (version != kVersion)
    return DecodeError{"version",
                       "unsupported version " + std::to_string(version)};
  std::uint8_t kind = data[5];
  if (kind < 1 || kind > 5)
    return DecodeError{"kind", "unknown kind " + std::to_string(kind)};
  std::uint16_t n = get_u16(data + 18);
  if (n > kMaxChannels)
    return DecodeError{"length", "channel count out of range"};
  std::size_t expected = kFrameHeaderBytes + 16u * n + kFrameCrcBytes;
  if (size != expected)
    return DecodeError{"length", "expected " + std::to_string(expected) +
                                     " bytes, got " + std::to_string(size)};
  std::uint32_t want_crc = get_u32(data + size - 4);
  std::uint32_t have_crc = crc_of(data, size - 4);
  if (want_crc != have_crc) return DecodeError{"crc32", "checksum mismatch"};

  CosimFrame f;
  f.version = version;
  f.kind = static_cast<FrameKind>(kind);
  f.seq = get_u32(data + 6);
  f.t_ns = get_u64(data + 10);
  f.channels.resize(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::uint8_t* p = data + kFrameHeaderBytes + 16u * i;
    f.channels[i] = Phasor{get_f64(p), get_f64(p + 8)};
  }
  return f;
}

// ---------------------------------------------------------------------------
// FdStream
// ---------------------------------------------------------------------------

FdStream::FdStream(int read_fd, int write_fd, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {
  ::signal(SIGPIPE, SIG_IGN);
}

FdStream::~FdStream() {
  if (owns_) {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }
}

void FdStream::send(const std::uint8_t* data, std::size_t size) {
  std::size_t off = 0;
  while (off < size) {
    ssize_t n = ::write(write_fd_, data + off, size - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw LinkError(std::string("link write failed: ") + strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool FdStream::recv_exact(std::uint8_t* data, std::size_t size,
                          int timeout_ms) {
  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + std::chrono::milliseconds(timeout_ms);
  std::size_t off = 0;
  while (off < size) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    deadline - clock::now())
                    .count();
    if (left < 0) return false;
    struct pollfd pfd {
      read_fd_, POLLIN, 0
    };
    int pr = ::poll(&pfd, 1, static_cast<int>(left) + 1);
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw LinkError(std::string("link poll failed: ") + strerror(errno));
    }
    if (pr == 0) return false;
    ssize_t n = ::read(read_fd_, data + off, size - off);
    if (n == 0) throw LinkError("link closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw LinkError(std::string("link read failed: ") + strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void send_frame(ByteStream& stream, const CosimFrame& frame) {
  auto bytes = encode_frame(frame);
  stream.send(bytes.data(), bytes.size());
}

std::optional<CosimFrame> recv_frame(ByteStream& stream, int timeout_ms) {
  std::uint8_t header[kFrameHeaderBytes];
  if (!stream.recv_exact(header, sizeof(header), timeout_ms))
    return std::nullopt;
  if (std::memcmp(header, kMagic, 4) != 0)
    throw LinkError("protocol error in field magic: bad magic");
  std::uint16_t n = get_u16(header + 18);
  if (n > kMaxChannels)
    throw LinkError("protocol error in field length: channel count");
  std::size_t rest = 16u * n + kFrameCrcBytes;
  std::vector<std::uint8_t> buf(kFrameHeaderBytes + rest);
  std::memcpy(buf.data(), header, kFrameHeaderBytes);
  if (!stream.recv_exact(buf.data() + kFrameHeaderBytes, rest, timeout_ms))
    return std::nullopt;
  auto result = decode_frame(buf.data(), buf.size());
  if (auto* err = std::get_if<DecodeError>(&result))
    throw LinkError("protocol error in field " + err->field + ": " +
                    err->message);
  return std::get<CosimFrame>(result);
}

// ---------------------------------------------------------------------------
// CosimLink
// ---------------------------------------------------------------------------

CosimLink::CosimLink(std::unique_ptr<ByteStream> stream, int timeout_ms)
    : stream_(std::move(stream)) {
  state_.timeout_ms = timeout_ms;
}

void CosimLink::handshake() {
  CosimFrame hello;
  hello.kind = FrameKind::Hello;
  hello.seq = 0;
  hello.channels.assign(3, Phasor{0.0, 0.0});  // phase count
  send_frame(*stream_, hello);
  auto reply = recv_frame(*stream_, state_.timeout_ms);
  if (!reply) {
    state_.phase = LinkState::Phase::Faulted;
    throw LinkError("handshake timeout");
  }
  if (reply->kind != FrameKind::Hello || reply->channels.size() != 3) {
    state_.phase = LinkState::Phase::Faulted;
    throw LinkError("handshake rejected: version/channel mismatch");
  }
  state_.phase = LinkState::Phase::Running;
}

std::array<RemotePhaseReply, 3> CosimLink::lockstep_exchange(
    long step_index, double dt_s, const std::array<Phasor, 3>& i_line_ka,
    const std::array<bool, 3>& ipb_level, bool backup_lor) {
  if (state_.phase != LinkState::Phase::Running)
    throw LinkError("link not running");

  CosimFrame req;
  req.kind = FrameKind::SampleRequest;
  req.seq = static_cast<std::uint32_t>(step_index + 1);
  req.t_ns = step_time_ns(step_index, dt_s);
  req.channels.resize(6);
  for (int ph = 0; ph < 3; ++ph) {
    req.channels[static_cast<std::size_t>(ph)] = i_line_ka[ph];
    req.channels[static_cast<std::size_t>(3 + ph)] =
        Phasor{ipb_level[ph] ? 1.0 : 0.0, backup_lor ? 1.0 : 0.0};
  }
  send_frame(*stream_, req);
  state_.last_seq_sent = req.seq;

  auto reply = recv_frame(*stream_, state_.timeout_ms);
  if (!reply) {
    state_.phase = LinkState::Phase::Faulted;
    throw LinkError("lock-step reply timeout at seq " +
                    std::to_string(req.seq));
  }
  if (reply->kind == FrameKind::Bye) {
    state_.phase = LinkState::Phase::Closed;
    throw LinkError("remote said bye mid-run");
  }
  if (reply->kind == FrameKind::Fault) {
    state_.phase = LinkState::Phase::Faulted;
    throw LinkError("remote reported a fault");
  }
  if (reply->kind != FrameKind::CommandReply || reply->seq != req.seq ||
      reply->channels.size() != 6) {
    state_.phase = LinkState::Phase::Faulted;
    throw LinkError("protocol error: unexpected reply for seq " +
                    std::to_string(req.seq));
  }
  state_.last_seq_received = reply->seq;

  std::array<RemotePhaseReply, 3> out;
  for (int ph = 0; ph < 3; ++ph) {
    out[ph].injection_kv = reply->channels[static_cast<std::size_t>(ph)];
    const Phasor& word = reply->channels[static_cast<std::size_t>(3 + ph)];
    int code = static_cast<int>(word.real());
    if (code < 1 || code > 4) {
      state_.phase = LinkState::Phase::Faulted;
      throw LinkError("protocol error: bad device mode code");
    }
    out[ph].mode = static_cast<DeviceMode>(code);
    out[ph].primary = word.imag() != 0.0;
  }
  return out;
}

void CosimLink::bye() {
  if (state_.phase != LinkState::Phase::Running) return;
  try {
    CosimFrame f;
    f.kind = FrameKind::Bye;
    f.seq = state_.last_seq_sent + 1;
    send_frame(*stream_, f);
  } catch (const LinkError&) {
    // best effort
  }
  state_.phase = LinkState::Phase::Closed;
}

// ---------------------------------------------------------------------------
// Device server
// ---------------------------------------------------------------------------

void serve_deployment(ByteStream& stream, const DeploymentConfig& cfg,
                      const FeatureFlags& flags, double dt_s) {
  const DeploymentConfig eff = effective_config(cfg, flags);
  std::array<DeviceState, 3> states;
  for (int ph = 0; ph < 3; ++ph) states[ph].phase = static_cast<Phase>(ph);

  // Handshake: wait for the simulator's Hello, answer in kind.
  auto hello = recv_frame(stream, 30'000);
  if (!hello || hello->kind != FrameKind::Hello) return;
  CosimFrame ack;
  ack.kind = FrameKind::Hello;
  ack.channels.assign(3, Phasor{0.0, 0.0});
  send_frame(stream, ack);

  while (true) {
    auto frame = recv_frame(stream, 3600'000);
    if (!frame || frame->kind == FrameKind::Bye) return;
    if (frame->kind != FrameKind::SampleRequest ||
        frame->channels.size() != 6) {
      CosimFrame fault;
      fault.kind = FrameKind::Fault;
      fault.seq = frame->seq;
      send_frame(stream, fault);
      return;
    }
    long step_index = static_cast<long>(frame->seq) - 1;

    CosimFrame reply;
    reply.kind = FrameKind::CommandReply;
    reply.seq = frame->seq;
    reply.t_ns = frame->t_ns;
    reply.channels.resize(6);
    for (int ph = 0; ph < 3; ++ph) {
      const Phasor flag_word = frame->channels[static_cast<std::size_t>(3 + ph)];
      DeviceCoreInput in;
      in.i_line_ka = frame->channels[static_cast<std::size_t>(ph)];
      in.ipb_level = flag_word.real() != 0.0;
      in.backup_lor = flag_word.imag() != 0.0;
      in.step_index = step_index;
      in.dt_s = dt_s;
      auto out = step_device_core(states[ph], in, eff);
      reply.channels[static_cast<std::size_t>(ph)] = out.injection_kv;
      reply.channels[static_cast<std::size_t>(3 + ph)] =
          Phasor{static_cast<double>(device_mode_code(out.mode)),
                 out.primary ? 1.0 : 0.0};
    }
    send_frame(stream, reply);
  }
}

// ---------------------------------------------------------------------------
// ChildProcess
// ---------------------------------------------------------------------------

ChildProcess::ChildProcess(const std::vector<std::string>& argv) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw LinkError("pipe creation failed");

  pid_ = ::fork();
  if (pid_ < 0) throw LinkError("fork failed");
  if (pid_ == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(args[0], args.data());
    ::perror("execv");
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  read_fd_ = from_child[0];
  write_fd_ = to_child[1];
}

ChildProcess::~ChildProcess() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0) ::close(write_fd_);
  if (pid_ > 0 && !waited_) {
    ::kill(pid_, SIGKILL);
    int status;
    ::waitpid(pid_, &status, 0);
  }
}

std::unique_ptr<ByteStream> ChildProcess::take_stream() {
  auto stream = std::make_unique<FdStream>(read_fd_, write_fd_, true);
  read_fd_ = -1;
  write_fd_ = -1;
  return stream;
}

int ChildProcess::wait() {
  if (pid_ <= 0) return -1;
  int status = 0;
  if (::waitpid(pid_, &status, 0) < 0) return -1;
  waited_ = true;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string executable_directory() {
  char buf[4096];
  ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return ".";
  buf[n] = '\0';
  std::string path(buf);
  auto slash = path.find_last_of('/');
  return slash == std::string::npos ? "." : path.substr(0, slash);
}

}  // namespace seriescomp
