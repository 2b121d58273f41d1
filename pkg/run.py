#!/usr/bin/env python3
"""
linmark 启动脚本
检查运行环境后把命令行参数交给 main_application
"""

import os
import sys
import traceback

REQUIRED_PACKAGES = {
    'numpy': 'numpy',
    'scipy': 'scipy',
    'pandas': 'pandas',
    'shapely': 'shapely',
    'yaml': 'pyyaml',
    'loguru': 'loguru',
    'tqdm': 'tqdm',
    'joblib': 'joblib',
}


def check_python_version():
    """检查Python版本"""
    if sys.version_info < (3, 9):
        print("错误：需要Python 3.9或更高版本", file=sys.stderr)
        print(f"当前版本：{sys.version}", file=sys.stderr)
        sys.exit(1)


def check_dependencies():
    """检查依赖库"""
    missing_packages = []
    for module, package in REQUIRED_PACKAGES.items():
        try:
            __import__(module)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print("错误：缺少以下依赖库：", file=sys.stderr)
        for package in missing_packages:
            print(f"  - {package}", file=sys.stderr)
        print("\n请运行以下命令安装依赖：", file=sys.stderr)
        print("pip install -r requirements.txt", file=sys.stderr)
        sys.exit(1)


def setup_environment():
    """设置运行环境"""
    current_dir = os.path.dirname(os.path.abspath(__file__))
    if current_dir not in sys.path:
        sys.path.insert(0, current_dir)
    os.environ['PYTHONUNBUFFERED'] = '1'


def main():
    """主函数"""
    check_python_version()
    check_dependencies()
    setup_environment()

    try:
        from main_application import cli_main
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\n用户中断，程序退出", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"\n启动失败：{str(e)}", file=sys.stderr)
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
