"""Adversarial corpus for sandbox verification.

Twenty-five snippets covering file reads and writes, network sockets,
process spawning, environment access, dunder escape chains, recursion bombs,
memory bombs, and infinite loops. Every one must resolve to rejected_unsafe,
resource_limit, or timeout; none may produce a data result or leave a
filesystem artifact. The test suites of both the worker and the host pool
run this corpus.
"""

ATTACKS: list[dict[str, str]] = [
    # --- file read ---
    {"name": "open_read", "source": "result = open('/etc/passwd').read()",
     "family": "rejected_unsafe"},
    {"name": "import_pathlib", "source": "import pathlib\nresult = pathlib.Path('/etc/passwd').read_text()",
     "family": "rejected_unsafe"},
    {"name": "pandas_read_csv", "source": "result = pd.read_csv('/etc/passwd')",
     "family": "rejected_unsafe"},
    {"name": "numpy_loadtxt", "source": "result = np.loadtxt('/etc/passwd', dtype=str)",
     "family": "rejected_unsafe"},
    # --- file write ---
    {"name": "open_write", "source": "open('pwned.txt', 'w').write('x')\nresult = 1",
     "family": "rejected_unsafe"},
    {"name": "dataframe_to_csv", "source": "df.to_csv('pwned.csv')\nresult = 1",
     "family": "rejected_unsafe"},
    {"name": "numpy_save", "source": "np.save('pwned.npy', np.zeros(3))\nresult = 1",
     "family": "rejected_unsafe"},
    # --- network ---
    {"name": "import_socket", "source": "import socket\nresult = socket.gethostname()",
     "family": "rejected_unsafe"},
    {"name": "import_urllib", "source": "import urllib.request\nresult = urllib.request.urlopen('http://example.com').read()",
     "family": "rejected_unsafe"},
    {"name": "import_http_client", "source": "from http.client import HTTPConnection\nresult = 1",
     "family": "rejected_unsafe"},
    # --- process spawn ---
    {"name": "import_os_system", "source": "import os\nos.system('touch pwned')\nresult = 1",
     "family": "rejected_unsafe"},
    {"name": "import_subprocess", "source": "import subprocess\nresult = subprocess.run(['ls'])",
     "family": "rejected_unsafe"},
    {"name": "pandas_module_walk_os", "source": "pd.io.common.os.system('touch pwned')\nresult = 1",
     "family": "rejected_unsafe"},
    # --- environment read ---
    {"name": "import_os_environ", "source": "import os\nresult = dict(os.environ)",
     "family": "rejected_unsafe"},
    {"name": "attr_environ_walk", "source": "result = pd.compat.os.environ['PATH']",
     "family": "rejected_unsafe"},
    # --- dunder escape chains ---
    {"name": "class_mro_walk", "source": "result = ().__class__.__mro__[1].__subclasses__()",
     "family": "rejected_unsafe"},
    {"name": "builtins_via_dict", "source": "result = __builtins__['eval']('1+1')",
     "family": "rejected_unsafe"},
    {"name": "getattr_dunder", "source": "result = getattr((), '__class__')",
     "family": "rejected_unsafe"},
    {"name": "import_dunder", "source": "result = __import__('os').getcwd()",
     "family": "rejected_unsafe"},
    {"name": "globals_probe", "source": "result = globals()",
     "family": "rejected_unsafe"},
    {"name": "lambda_globals", "source": "f = lambda: 0\nresult = f.__globals__",
     "family": "rejected_unsafe"},
    # --- resource bombs ---
    {"name": "recursion_bomb", "source": "def f(n):\n    return f(n)\nresult = f(0)",
     "family": "resource_limit"},
    {"name": "memory_bomb_list", "source": "result = [0] * (10 ** 10)",
     "family": "resource_limit"},
    {"name": "memory_bomb_numpy", "source": "result = np.ones((100000, 100000))",
     "family": "resource_limit"},
    # --- wall clock ---
    {"name": "infinite_loop", "source": "while True:\n    pass\nresult = 1",
     "family": "timeout"},
]

FAMILIES = ("rejected_unsafe", "resource_limit", "timeout")
