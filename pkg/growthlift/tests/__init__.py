"""
growthlift - 测试套件

运行测试:
    pytest growthlift/tests/ -v

运行带覆盖率:
    pytest growthlift/tests/ -v --cov=growthlift --cov-report=html
"""

# 测试类在各自的模块中定义，通过 pytest 自动发现
