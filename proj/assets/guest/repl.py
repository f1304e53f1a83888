# Persistent guest interpreter for the execute_python tool.
#
# argv: <sandbox root> <virtual root>. Requests arrive one JSON object per
# line on fd 4 ({"code": ...}); each gets one JSON line on fd 3
# ({"output": ..., "error": bool}). Paths under the virtual root are mapped
# onto the sandbox root, writes outside it are refused, and sockets and
# process creation are blocked.

import ast
import builtins
import io
import json
import os
import sys
import tempfile
import threading
import traceback

ROOT = os.path.realpath(sys.argv[1])
VIRTUAL = sys.argv[2].rstrip("/") or "/mnt/data"
TMP = os.path.join(ROOT, ".tmp")
os.makedirs(TMP, exist_ok=True)
os.chdir(ROOT)
sys.path.insert(0, ROOT)

channel_in = os.fdopen(4, "r", encoding="utf-8", closefd=False)
channel_out = os.fdopen(3, "w", encoding="utf-8", closefd=False)
capture = tempfile.TemporaryFile(dir=TMP)


def translate(p):
    if isinstance(p, int):
        return p
    try:
        s = os.fspath(p)
    except TypeError:
        return p
    if isinstance(s, bytes):
        v = os.fsencode(VIRTUAL)
        if s == v or s.startswith(v + b"/"):
            return os.fsencode(ROOT) + s[len(v):]
        return p
    if s == VIRTUAL or s.startswith(VIRTUAL + "/"):
        return ROOT + s[len(VIRTUAL):]
    return p


def mapped(fn, npaths=1):
    def wrapper(*args, **kwargs):
        args = [translate(a) if i < npaths else a for i, a in enumerate(args)]
        for key in ("path", "file", "src", "dst", "top"):
            if key in kwargs:
                kwargs[key] = translate(kwargs[key])
        return fn(*args, **kwargs)

    wrapper.__name__ = getattr(fn, "__name__", "wrapped")
    wrapper.__doc__ = getattr(fn, "__doc__", None)
    return wrapper


_one = ["stat", "lstat", "listdir", "scandir", "mkdir", "remove", "unlink", "rmdir", "chdir", "access",
        "utime", "chmod", "truncate", "open", "readlink", "makedirs", "removedirs"]
_two = ["rename", "replace", "link", "symlink"]
for name in _one + _two:
    if hasattr(os, name):
        setattr(os, name, mapped(getattr(os, name), 2 if name in _two else 1))
builtins.open = mapped(builtins.open)
io.open = builtins.open

try:
    import pathlib

    accessor = getattr(pathlib, "_NormalAccessor", None)
    if accessor is not None:
        for name in _one + _two:
            if hasattr(accessor, name):
                setattr(accessor, name, staticmethod(getattr(os, name, builtins.open)))
        accessor.open = staticmethod(builtins.open)
except ImportError:
    pass

# ---- confinement

WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC
_guard = threading.local()


def inside(path):
    if isinstance(path, int):
        return True
    try:
        real = os.path.realpath(os.fsdecode(translate(path)))
    except Exception:
        return False
    return real == ROOT or real.startswith(ROOT + os.sep) or real == "/dev/null"


PATH_EVENTS = {
    "os.mkdir": (0,), "os.remove": (0,), "os.rmdir": (0,), "os.rename": (0, 1), "os.link": (0, 1),
    "os.symlink": (1,), "os.chmod": (0,), "os.chown": (0,), "os.truncate": (0,), "os.utime": (0,),
    "os.chflags": (0,), "os.setxattr": (0,), "os.removexattr": (0,), "shutil.copyfile": (1,),
    "shutil.copymode": (1,), "shutil.copystat": (1,), "shutil.copytree": (1,), "shutil.move": (0, 1),
    "shutil.rmtree": (0,), "shutil.chown": (0,),
}
BLOCKED = {
    "socket.connect": "network access is disabled",
    "socket.sendto": "network access is disabled",
    "socket.sendmsg": "network access is disabled",
    "socket.bind": "network access is disabled",
    "socket.getaddrinfo": "network access is disabled",
    "socket.gethostbyname": "network access is disabled",
    "subprocess.Popen": "process creation is disabled",
    "os.system": "process creation is disabled",
    "os.exec": "process creation is disabled",
    "os.posix_spawn": "process creation is disabled",
    "os.spawn": "process creation is disabled",
    "os.fork": "process creation is disabled",
    "os.forkpty": "process creation is disabled",
    "os.kill": "signalling other processes is disabled",
    "os.killpg": "signalling other processes is disabled",
}


def audit(event, args):
    if getattr(_guard, "busy", False):
        return
    _guard.busy = True
    try:
        if event == "open":
            path, _mode, flags = args
            if path is not None and flags is not None and flags & WRITE_FLAGS and not inside(path):
                raise PermissionError("write outside %s is not permitted: %r" % (VIRTUAL, path))
        elif event in PATH_EVENTS:
            for i in PATH_EVENTS[event]:
                if i < len(args) and isinstance(args[i], (str, bytes, os.PathLike)) and not inside(args[i]):
                    raise PermissionError("%s outside %s is not permitted: %r" % (event, VIRTUAL, args[i]))
        elif event in BLOCKED:
            raise PermissionError(BLOCKED[event])
    finally:
        _guard.busy = False


sys.addaudithook(audit)

# ---- execution

namespace = {"__name__": "__main__", "__builtins__": builtins}


def run(code):
    error = False
    sys.stdout.flush()
    sys.stderr.flush()
    capture.seek(0)
    capture.truncate()
    saved = os.dup(1), os.dup(2)
    os.dup2(capture.fileno(), 1)
    os.dup2(capture.fileno(), 2)
    try:
        tree = ast.parse(code, "<cell>", "exec")
        last = None
        if tree.body and isinstance(tree.body[-1], ast.Expr):
            last = ast.Expression(tree.body.pop().value)
        exec(compile(tree, "<cell>", "exec"), namespace)
        if last is not None:
            value = eval(compile(last, "<cell>", "eval"), namespace)
            if value is not None:
                print(repr(value))
    except SyntaxError:
        traceback.print_exception(*sys.exc_info(), limit=0)
        error = True
    except BaseException:
        kind, value, tb = sys.exc_info()
        traceback.print_exception(kind, value, tb.tb_next)
        error = True
    finally:
        sys.stdout.flush()
        sys.stderr.flush()
        os.dup2(saved[0], 1)
        os.dup2(saved[1], 2)
        os.close(saved[0])
        os.close(saved[1])
    capture.seek(0)
    return capture.read().decode("utf-8", "replace"), error


for line in channel_in:
    try:
        request = json.loads(line)
        output, error = run(request.get("code", ""))
    except Exception as e:  # protocol trouble, not user code
        output, error = "guest error: %s" % e, True
    channel_out.write(json.dumps({"output": output, "error": error}) + "\n")
    channel_out.flush()
