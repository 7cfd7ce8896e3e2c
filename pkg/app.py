"""時間格時間模式斷層掃描 - 命令列入口."""

from src.cli import main

if __name__ == "__main__":
    main()
